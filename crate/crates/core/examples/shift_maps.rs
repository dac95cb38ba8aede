//! The shift maps `s_y` on the unit ball: identity outside the ball, close to a translation
//! near the center, and collapsing to the identity as `y -> 0`.

use eqmollify::ball::BallMap;
use nalgebra::DVector;

fn main() -> eqmollify::Result<()> {
    let ball = BallMap::new(2);
    println!("r* = {:.6}", ball.r_star());
    let x = DVector::from_vec(vec![0.2, 0.1]);
    for y in [1e-1, 1e-2, 1e-3, 1e-4] {
        let s = ball.shift(DVector::from_vec(vec![y, 0.0]));
        let (sx, j) = s.apply_with_jacobian(&x)?;
        println!(
            "|y| = {y:.0e}: s_y(x) - x = {:+.3e}, det Ds_y = {:.9}",
            (sx - &x).norm(),
            j.determinant()
        );
    }
    let outside = DVector::from_vec(vec![1.1, 0.0]);
    let s = ball.shift(DVector::from_vec(vec![0.05, 0.05]));
    println!("outside the ball: {}", s.apply(&outside)? == outside);
    Ok(())
}
