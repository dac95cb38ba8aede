//! `W^{2,inf}` distance between the round sphere metric and its mollification `H~_eps`.
//! The bridge part of the shift maps makes the constants large, so the sweep goes to small eps.

use eqmollify::kernel::MollifierKernel;
use eqmollify::metric::{
    w2_inf_distance, ConformalMetric, DerivativeMode, MollifiedMetric, SampleGrid, SharedField,
};
use std::sync::Arc;

fn main() -> eqmollify::Result<()> {
    let g: SharedField = Arc::new(ConformalMetric::sphere(2));
    let grid = SampleGrid::ball(2, 0.95, 13);
    for i in 0..6 {
        let eps = 0.05 * 0.25f64.powi(i);
        let rule = MollifierKernel::new(2, eps, 4)?.rule();
        let h: SharedField = Arc::new(MollifiedMetric::new(g.clone(), rule)?);
        let d = w2_inf_distance(h, g.clone(), &grid, DerivativeMode::default())?;
        println!("eps = {eps:.3e}  |H~ g - g| = {d:.3e}");
    }
    Ok(())
}
