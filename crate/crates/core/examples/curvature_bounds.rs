//! Sectional-curvature bounds of model metrics and of a smoothed `C^{1,1}` metric.

use eqmollify::curvature::{curvature_bounds, BoundsSampling};
use eqmollify::kernel::MollifierKernel;
use eqmollify::metric::{compose_hg, ConformalMetric, DerivativeMode, SharedField};
use eqmollify::scenario::scenario;
use std::sync::Arc;

fn main() -> eqmollify::Result<()> {
    let analytic = BoundsSampling {
        mode: DerivativeMode::Analytic,
        ..Default::default()
    };
    let s = scenario("radial_c11", 32)?;
    let pts = s.sample_points(31);
    for (name, g) in [
        (
            "sphere",
            Arc::new(ConformalMetric::sphere(2)) as SharedField,
        ),
        ("poincare", Arc::new(ConformalMetric::poincare(2))),
        ("radial_c11", s.metric.clone()),
    ] {
        let b = curvature_bounds(g.as_ref(), &pts, analytic)?;
        println!("{name:<11} K in [{:+.6}, {:+.6}]", b.k_lower, b.k_upper);
    }
    let rule = MollifierKernel::new(2, 0.01, 3)?.rule();
    let hg = compose_hg(s.metric.clone(), &s.atlas, &[rule], &s.group, &[])?;
    let b = curvature_bounds(hg.as_ref(), &pts, BoundsSampling::default())?;
    println!(
        "smoothed radial_c11 at eps = 0.01: K in [{:+.6}, {:+.6}]",
        b.k_lower, b.k_upper
    );
    Ok(())
}
