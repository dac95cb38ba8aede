//! Group-averaged smoothing of a rotation-invariant Dirac orbit: the result stays invariant
//! and keeps the total mass.

use eqmollify::currents::smoothing::INVARIANCE_TOLERANCE;
use eqmollify::currents::{smooth_z, EquivariantSmoother};
use eqmollify::kernel::MollifierKernel;
use eqmollify::scenario::{dirac_orbit, scenario};

fn main() -> eqmollify::Result<()> {
    let s = scenario("euclid_z4", 64)?;
    let t = dirac_orbit();
    let forms = s.forms(0)?;
    let rule = MollifierKernel::new(2, 0.1, 4)?.rule();
    let zg = EquivariantSmoother::new(
        &t,
        rule.clone(),
        s.atlas[0].clone(),
        s.group.clone(),
        &forms,
        INVARIANCE_TOLERANCE,
    )?;
    println!("mass: {:.10}", zg.evaluate(&forms[0])?);
    for w in forms.iter().skip(1).take(5) {
        let (mut averaged, mut raw) = (0.0f64, 0.0f64);
        for g in s.group.probe_elements(8) {
            let moved = w.pullback_linear(&g);
            averaged = averaged.max((zg.evaluate(&moved)? - zg.evaluate(w)?).abs());
            raw = raw.max((smooth_z(&t, &moved, &rule)? - smooth_z(&t, w, &rule)?).abs());
        }
        println!(
            "{:<24} residual Z^G = {averaged:.2e}  Z = {raw:.2e}",
            w.label()
        );
    }
    Ok(())
}
