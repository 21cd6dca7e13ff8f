//! Fluorescence decay after the optical steady state of Site I: Poisson
//! counts, lifetimes from a thermalized trace, then populations with the
//! lifetimes held fixed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nvstrain::inference::{fit_decay, fit_thermal_lifetimes, DecayData, LevenbergMarquardt};
use nvstrain::photodynamics::excited_fractions;
use nvstrain::presets::{DEFAULT_ETA, SITE_I};
use nvstrain::{build, decay_curve, effective_lifetimes, eigensolve, steady_state};

fn main() -> nvstrain::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sol = eigensolve(&build(SITE_I.es_couplings(), 0.0));
    let labels = sol.labels();
    let tau_all = effective_lifetimes(&sol, &SITE_I.lifetime_model())?;
    let tau = labels.map(|j| tau_all[j]);
    let t = nvstrain::hamiltonian::linspace(0.0, 40.0, 401);

    // thermalized spins excite all three levels equally
    let thermal = decay_curve([1.0 / 3.0; 3], tau, &t, 1.0)?;
    let counts = thermal.poisson_counts(1e5, &mut rng);
    let th = fit_thermal_lifetimes(&DecayData::new(t.clone(), counts).with_poisson_weights(), &LevenbergMarquardt::default())?;
    println!(
        "thermal fit: tau_bright {:.3} ± {:.3} ns, tau_dark {:.3} ± {:.3} ns (model {:.3?})",
        th.tau_bright_ns, th.fit.std_errors[1], th.tau_dark_ns, th.fit.std_errors[2], tau
    );

    let ss = steady_state(&sol, &SITE_I.rates(DEFAULT_ETA)?)?;
    let p = excited_fractions(&ss.ground.ground, &sol);
    let truth = labels.map(|j| p[j]);
    let curve = decay_curve(truth, tau, &t, 1.0)?;
    let counts = curve.poisson_counts(1e5, &mut rng);
    let fit = fit_decay(&DecayData::new(t, counts).with_poisson_weights(), th.lifetimes())?;
    println!("populations: fitted {:.4?}, true {:.4?}", fit.populations, truth);
    println!("condition number {:.1}", fit.condition_number);
    Ok(())
}
