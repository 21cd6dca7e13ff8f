//! Excited-state sweep of the axial field from 0 to 800 G. Prints a table of
//! energies, bright-state mixing and lifetimes.

use nvstrain::hamiltonian::{field_sweep, FieldSweep};
use nvstrain::presets::SitePreset;

fn main() -> nvstrain::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "site-IV".into());
    let site = SitePreset::by_name(&name)?;
    let sweep = FieldSweep {
        start_g: 0.0,
        stop_g: 800.0,
        steps: 17,
    };
    println!("{} (pure-state lifetimes {:.3?} ns)", site.name, site.lifetime_model().pure_lifetimes());
    println!("{:>6} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7} {:>7}", "bz_G", "e4", "e5", "e6", "m4", "tau4", "tau5", "tau6");
    for p in field_sweep(&site.es_couplings(), &site.lifetime_model(), &sweep)? {
        let [e4, e5, e6] = p.energies;
        let [t4, t5, t6] = p.lifetimes_ns;
        println!(
            "{:>6.0} {:>9.4} {:>9.4} {:>9.4} {:>7.4} {:>7.3} {:>7.3} {:>7.3}",
            p.bz_gauss, e4, e5, e6, p.mixing[0], t4, t5, t6
        );
    }
    Ok(())
}
