//! Joint fit of excited-state |D|, |E1|, |E2| to transition frequencies and
//! lifetimes measured across a field sweep, with 1 % noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use nvstrain::hamiltonian::GAMMA_E_MHZ_PER_G;
use nvstrain::inference::{fit_joint_es, JointEsData, JointEsOptions};
use nvstrain::presets::{SITE_I, SITE_IV};

fn main() -> nvstrain::Result<()> {
    let fields: Vec<f64> = (0..17).map(|i| 50.0 * i as f64).collect();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for site in [SITE_I, SITE_IV] {
        let lm = site.lifetime_model();
        let mut data = JointEsData::synthetic(&site.es_couplings(), &lm, &fields, 0.01, GAMMA_E_MHZ_PER_G)?;
        for p in &mut data.odmr {
            p.f_ghz += p.f_err_ghz * noise.sample(&mut rng);
        }
        for p in &mut data.lifetimes {
            for (t, e) in p.tau_ns.iter_mut().zip(p.tau_err_ns) {
                *t += e * noise.sample(&mut rng);
            }
        }
        let fit = fit_joint_es(&data, &lm, &JointEsOptions::default())?;
        println!("{} ({} iterations)", site.name, fit.fit.iterations);
        for (name, est, truth) in [
            ("|D| ", fit.d, site.d_es_ghz.value),
            ("|E1|", fit.e1, site.e1_es_ghz.value),
            ("|E2|", fit.e2, site.e2_es_ghz.value),
        ] {
            println!("  {name} = {:.4} ± {:.4} GHz (true {truth})", est.value, est.std_error);
        }
    }
    Ok(())
}
