//! Excited-state levels of the preset sites at zero field: energies, |0⟩
//! character, upper-pair splitting and mixing-weighted lifetimes.

use nvstrain::presets::ALL;
use nvstrain::{build, effective_lifetimes, eigensolve, transition_frequencies};

fn main() -> nvstrain::Result<()> {
    for site in ALL {
        let sol = eigensolve(&build(site.es_couplings(), 0.0));
        let tau = effective_lifetimes(&sol, &site.lifetime_model())?;
        let (e, m) = (sol.energies(), sol.mixing());
        println!("{}", site.name);
        for (label, j) in ["|4>", "|5>", "|6>"].iter().zip(sol.labels()) {
            println!("  {label} E = {:+.4} GHz  m = {:.4}  tau = {:.3} ns", e[j], m[j], tau[j]);
        }
        println!("  upper-pair splitting {:.4} GHz", sol.upper_pair_splitting());
        let f: Vec<String> = transition_frequencies(&sol)
            .iter()
            .map(|t| format!("{:.4}", t.frequency_ghz))
            .collect();
        println!("  transitions [{}] GHz", f.join(", "));
    }

    // ground state at 129 GPa
    let gs = eigensolve(&build(nvstrain::presets::SITE_I.gs_couplings(), 0.0));
    println!("ground-state resonance {:.3} GHz", transition_frequencies(&gs)[1].frequency_ghz);
    Ok(())
}
