//! Contrast along a line crossing a strain interface: a logistic ramp of
//! symmetry-breaking stress, the raw and PSF-blurred contrast, and the
//! reversal point with its transition width.

use nvstrain::mapping::{profile_contrast, profile_couplings, ContrastSettings, LogisticRamp, StrainProfile, DEFAULT_PSF_FWHM_UM};
use nvstrain::presets::{DEFAULT_ETA, DEFAULT_MW_RATE_MHZ, SITE_IV};
use nvstrain::strain::CouplingModel;
use nvstrain::StressTensor;

fn main() -> nvstrain::Result<()> {
    // unit couplings (MHz/GPa): σzz shifts D, σxz sets E1, σd sets E2
    let model = CouplingModel {
        g41: 0.0,
        g43: 1.0,
        g15: -1.0,
        g16: 0.0,
        g25: 0.0,
        g26: 1.0,
        d0_ghz: 0.85,
    };
    // Site I strain far from the interface, Site IV strain beyond it
    let site_i = StressTensor::new(160.0, -160.0, 0.0, 0.0, 90.0, 0.0);
    let site_iv = StressTensor::new(1190.0, -1190.0, -50.0, 0.0, 250.0, 0.0);
    let ramp = LogisticRamp {
        baseline: site_i,
        ramp: site_iv - site_i,
        x0_um: 7.6,
        width_um: 0.02,
    };
    let x = nvstrain::hamiltonian::linspace(5.0, 10.0, 1001);
    let profile = StrainProfile::logistic(x, &ramp)?;
    let rates = SITE_IV.rates(DEFAULT_ETA)?;
    let settings = ContrastSettings::new(0.0, DEFAULT_MW_RATE_MHZ);

    let couplings = profile_couplings(&profile, &model)?;
    let cp = profile_contrast(&profile, &model, &rates, &settings, DEFAULT_PSF_FWHM_UM)?;
    for i in (0..cp.positions.len()).step_by(100) {
        let [d, e1, e2] = couplings.couplings[i].moduli();
        println!(
            "x = {:5.2} um  |D| {:.3}  |E1| {:.3}  |E2| {:.3}  contrast {:+.4} (blurred {:+.4})",
            cp.positions[i], d, e1, e2, cp.raw[i], cp.convolved[i]
        );
    }
    for (label, rev) in [("raw", cp.reversal_raw()), ("blurred", cp.reversal_convolved())] {
        match rev {
            Ok(r) => println!(
                "{label}: reversal at {:.3} um, width {} (plateaus {:+.4} / {:+.4})",
                r.x_rev_um,
                r.width_um.map_or("n/a".into(), |w| format!("{:.3} um", w)),
                r.plateaus.0,
                r.plateaus.1
            ),
            Err(e) => println!("{label}: {e}"),
        }
    }
    Ok(())
}
