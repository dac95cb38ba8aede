//! Graph distances of the smoothed `C^{1,1}` metric approach those of the base metric.

use eqmollify::distance::{dilation_estimate, random_pairs, SampleGraph};
use eqmollify::kernel::MollifierKernel;
use eqmollify::metric::{compose_hg, RayCachedMetric};
use eqmollify::scenario::scenario;

fn main() -> eqmollify::Result<()> {
    let s = scenario("radial_c11", 64)?;
    let (lo, hi) = (vec![-0.9, -0.9], vec![0.9, 0.9]);
    let base = SampleGraph::build(s.metric.as_ref(), lo.clone(), hi.clone(), 21)?;
    let pairs = random_pairs(base.node_count(), 32, 42);
    for eps in [0.05, 0.0125, 0.003125] {
        let rule = MollifierKernel::new(2, eps, 3)?.rule();
        let hg = compose_hg(s.metric.clone(), &s.atlas, &[rule], &s.group, &[])?;
        let cached = RayCachedMetric::build(hg.as_ref(), 1.28, 200)?;
        let graph = SampleGraph::build(&cached, lo.clone(), hi.clone(), 21)?;
        println!(
            "eps = {eps:<9} max |d_eps/d_0 - 1| = {:.3e}",
            dilation_estimate(&base, &graph, &pairs)?.max_deviation
        );
    }
    Ok(())
}
