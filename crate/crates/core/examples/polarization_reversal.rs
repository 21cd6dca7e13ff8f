//! Pulse-train polarization at Site I and Site IV: steady states, the
//! approach from a swapped preparation, and the resulting ODMR contrast sign.

use nvstrain::photodynamics::{driven_contrast, prepare, pulse_train, Preparation};
use nvstrain::presets::{DEFAULT_ETA, DEFAULT_MW_RATE_MHZ, SITE_I, SITE_IV};
use nvstrain::{build, eigensolve, steady_state, ContrastMode, ResonancePair};

fn main() -> nvstrain::Result<()> {
    let both = [ResonancePair::Plus, ResonancePair::Minus];
    for site in [SITE_I, SITE_IV] {
        let rates = site.rates(DEFAULT_ETA)?;
        println!("{}", site.name);
        for bz in [0.0, 152.0, 800.0] {
            let sol = eigensolve(&build(site.es_couplings(), bz));
            let ss = steady_state(&sol, &rates)?;
            let c = driven_contrast(&sol, &rates, DEFAULT_MW_RATE_MHZ, &both, ContrastMode::PulseTrain)?;
            println!(
                "  {bz:>5} G: P4 = {:.3}, ground (+1, 0, -1) = {:.3?}, contrast {:+.4}",
                ss.p4, ss.ground.ground, c
            );
        }
        let sol = eigensolve(&build(site.es_couplings(), 0.0));
        let start = prepare(Preparation::Swapped(ResonancePair::Plus), &sol, &rates)?;
        let p4: Vec<String> = pulse_train(start, &sol, &rates, 30)?
            .iter()
            .step_by(5)
            .map(|r| format!("{:.3}", r.p4))
            .collect();
        println!("  swapped start, every 5th pulse: {}", p4.join(" "));
    }
    Ok(())
}
