//! Weak convergence of the smoothed currents `Z_eps T` and `Z~_eps T` for a square loop.

use eqmollify::currents::{smooth_z, smooth_z_tilde};
use eqmollify::kernel::MollifierKernel;
use eqmollify::scenario::{scenario, square_loop};

fn main() -> eqmollify::Result<()> {
    let s = scenario("orbit_currents", 64)?;
    let t = square_loop();
    for w in s.forms(1)?.iter().take(4) {
        let exact = t.evaluate(w)?;
        println!("{}: T(w) = {exact:+.8}", w.label());
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let rule = MollifierKernel::new(2, eps, 4)?.rule();
            let z = smooth_z(&t, w, &rule)? - exact;
            let zt = smooth_z_tilde(&t, w, &rule)? - exact;
            println!("  eps = {eps:<6} Z error = {z:+.3e}  Z~ error = {zt:+.3e}");
        }
    }
    Ok(())
}
