//! Splits a stress tensor into its symmetry-preserving and symmetry-breaking
//! parts and maps both onto spin Hamiltonian couplings.

use nvstrain::strain::CouplingModel;
use nvstrain::{couple, decompose, rotate_to_nv_frame, StressTensor};

fn main() -> nvstrain::Result<()> {
    let sigma = StressTensor::new(3.0, 1.0, 2.0, 0.5, 0.0, 0.0);
    let parts = decompose(&sigma)?;
    println!("input      {:?}", sigma.to_array());
    println!("preserving {:?}", parts.preserving.to_array());
    println!("breaking   {:?}", parts.breaking.to_array());

    // synthetic coupling constants, MHz/GPa
    let model = CouplingModel {
        g41: 10.0,
        g43: 15.0,
        g15: -8.0,
        g16: 6.0,
        g25: 4.0,
        g26: 3.0,
        d0_ghz: 1.42,
    };
    for (name, s) in [("full", sigma), ("preserving", parts.preserving), ("breaking", parts.breaking)] {
        let k = couple(&s, &model)?;
        println!("{name:>10}: D = {:.4} GHz, E1 = {:.4}, E2 = {:.4}", k.d, k.e1, k.e2);
    }

    // uniaxial stress along the cubic [111] axis lands on the NV axis
    let n = [1.0f64, 1.0, 1.0].map(|v| v / 3f64.sqrt());
    let mut lab = [0.0; 6];
    let p = 2.0;
    lab[0] = p * n[0] * n[0];
    lab[1] = p * n[1] * n[1];
    lab[2] = p * n[2] * n[2];
    lab[3] = p * n[0] * n[1];
    lab[4] = p * n[0] * n[2];
    lab[5] = p * n[1] * n[2];
    let nv = rotate_to_nv_frame(&StressTensor::from_array(lab));
    println!("[111] uniaxial in NV frame: {:.3?}", nv.to_array());
    Ok(())
}
