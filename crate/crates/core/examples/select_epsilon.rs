//! Largest ladder epsilon with `|H^G g - g| <= a_nu / k` on the round sphere chart.

use eqmollify::metric::{a_nu, select_epsilon_for_k, DerivativeMode, EpsilonSearch};
use eqmollify::scenario::scenario;

fn main() -> eqmollify::Result<()> {
    let s = scenario("round_sphere_chart", 64)?;
    let grid = s.grid(9);
    let alpha = a_nu(s.metric.as_ref(), &grid)?;
    let search = EpsilonSearch {
        epsilons: (0..7).map(|i| 0.05 * 0.25f64.powi(i)).collect(),
        quadrature_level: 4,
        grid,
        mode: DerivativeMode::default(),
    };
    println!("a_nu = {alpha:.6}");
    for k in [1, 2, 4] {
        match select_epsilon_for_k(s.metric.clone(), &s.atlas[0], &s.group, k, alpha, &search) {
            Ok(sel) => println!(
                "k = {k}: eps = {:.3e} (deviation {:.3e} <= {:.3e})",
                sel.epsilon, sel.deviation, sel.bound
            ),
            Err(e) => println!("k = {k}: {e}"),
        }
    }
    Ok(())
}
