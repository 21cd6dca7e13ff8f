//! Ground-state ODMR spectra with contrast from the excited-state dynamics:
//! a dip for Site I, peaks for Site IV at 50 G.

use nvstrain::presets::{DEFAULT_ETA, DEFAULT_LINEWIDTH_MHZ, DEFAULT_MW_RATE_MHZ, SITE_I, SITE_IV};
use nvstrain::{build, eigensolve, odmr_spectrum, ContrastMode};

fn main() -> nvstrain::Result<()> {
    for (site, bz) in [(SITE_I, 0.0), (SITE_IV, 50.0)] {
        let gs = eigensolve(&build(site.gs_couplings(), bz));
        let es = eigensolve(&build(site.es_couplings(), bz));
        let f = nvstrain::hamiltonian::linspace(site.d_gs_ghz - 0.25, site.d_gs_ghz + 0.25, 501);
        let s = odmr_spectrum(
            &gs,
            &es,
            &site.rates(DEFAULT_ETA)?,
            DEFAULT_MW_RATE_MHZ,
            ContrastMode::PulseTrain,
            &f,
            DEFAULT_LINEWIDTH_MHZ,
        )?;
        println!("{} at {bz} G", site.name);
        for r in &s.resonances {
            println!("  line at {:.4} GHz, contrast {:+.4} ({:?})", r.frequency_ghz, r.contrast, r.pairs);
        }
        let bars = "##############################";
        let peak = s.contrast.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for (fi, c) in s.f_ghz.iter().zip(&s.contrast).step_by(20) {
            let n = (c.abs() / peak * bars.len() as f64).round() as usize;
            println!("  {fi:.3} {c:+.5} {}{}", if *c < 0.0 { "-" } else { "+" }, &bars[..n]);
        }
    }
    Ok(())
}
