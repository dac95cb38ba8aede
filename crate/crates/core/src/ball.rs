//! The radial diffeomorphism `h: R^n -> B^n` and the compactly supported shifts
//! `s_y = h o tau_y o h^-1` (identity outside the unit ball).
//!
//! The radial profile `g: (0, 1) -> (0, inf)` is the identity below `1/3`,
//! `exp(1 / (1 - r)^2)` above `2/3`, and a convex blend of the two on the bridge in between.
//! The blend weight is a `C^inf` step that is flat outside `[11/30, 19/30]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Start of the blending interval (blend weight is exactly 0 below).
pub const BRIDGE_START: f64 = 11.0 / 30.0;
/// End of the blending interval (blend weight is exactly 1 above).
pub const BRIDGE_END: f64 = 19.0 / 30.0;
/// Profile value beyond which shifts are treated as the identity.
pub const THRESHOLD_VALUE: f64 = 1e12;

/// `C^inf` step: 0 for `t <= 0`, 1 for `t >= 1`, `e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})` between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

pub fn smooth_step_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    let s = a + b;
    a * b * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / (s * s)
}

fn outer_branch(r: f64) -> f64 {
    let d = 1.0 - r;
    (1.0 / (d * d)).exp()
}

fn outer_branch_derivative(r: f64) -> f64 {
    let d = 1.0 - r;
    outer_branch(r) * 2.0 / (d * d * d)
}

/// The radial profile `g` with its `C^inf` bridge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    pub bridge_start: f64,
    pub bridge_end: f64,
    /// Radius `r*` with `g(r*) = THRESHOLD_VALUE`.
    pub r_star: f64,
}

impl Default for RadialProfile {
    fn default() -> Self {
        Self {
            bridge_start: BRIDGE_START,
            bridge_end: BRIDGE_END,
            r_star: 1.0 - 1.0 / THRESHOLD_VALUE.ln().sqrt(),
        }
    }
}

impl RadialProfile {
    fn blend(&self, r: f64) -> (f64, f64) {
        let width = self.bridge_end - self.bridge_start;
        let t = (r - self.bridge_start) / width;
        (smooth_step(t), smooth_step_derivative(t) / width)
    }

    /// `(g(r), g'(r))` sharing the exponentials between value and derivative.
    pub fn g_and_prime(&self, r: f64) -> (f64, f64) {
        if r <= self.bridge_start {
            (r, 1.0)
        } else if r >= self.bridge_end {
            let d = 1.0 - r;
            let e = (1.0 / (d * d)).exp();
            (e, e * 2.0 / (d * d * d))
        } else {
            let (w, dw) = self.blend(r);
            let d = 1.0 - r;
            let e = (1.0 / (d * d)).exp();
            let de = e * 2.0 / (d * d * d);
            ((1.0 - w) * r + w * e, (1.0 - w) + w * de + dw * (e - r))
        }
    }

    /// `g(r)` for `r in (0, 1)`.
    pub fn g(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!(
                "radial profile needs r in (0, 1), got {r}"
            )));
        }
        Ok(self.g_unchecked(r))
    }

    /// `g` extended by `g(0) = 0`; may overflow to `inf` close to 1.
    pub fn g_unchecked(&self, r: f64) -> f64 {
        if r <= self.bridge_start {
            r
        } else if r >= self.bridge_end {
            outer_branch(r)
        } else {
            let (w, _) = self.blend(r);
            (1.0 - w) * r + w * outer_branch(r)
        }
    }

    /// `g'(r)`.
    pub fn g_prime(&self, r: f64) -> f64 {
        if r <= self.bridge_start {
            1.0
        } else if r >= self.bridge_end {
            outer_branch_derivative(r)
        } else {
            let (w, dw) = self.blend(r);
            let e = outer_branch(r);
            (1.0 - w) + w * outer_branch_derivative(r) + dw * (e - r)
        }
    }

    /// `g^-1(s)`: exact below the bridge, closed form above it, safeguarded Newton inside.
    pub fn g_inverse(&self, s: f64, tol: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("g^-1 needs s > 0, got {s}")));
        }
        if s <= self.bridge_start {
            return Ok(s);
        }
        let upper = outer_branch(self.bridge_end);
        if s >= upper {
            return Ok(1.0 - 1.0 / s.ln().sqrt());
        }
        // Newton on ln g, which is far better conditioned than g on the bridge; bisection
        // safeguards keep the iterate bracketed.
        let (mut lo, mut hi) = (self.bridge_start, self.bridge_end);
        let target = s.ln();
        let mut r =
            lo + (hi - lo) * ((target - lo.ln()) / (upper.ln() - lo.ln())).clamp(0.05, 0.95);
        const MAX_ITER: usize = 200;
        let mut last_width = hi - lo;
        for _ in 0..MAX_ITER {
            let (g, dg) = self.g_and_prime(r);
            let f = g.ln() - target;
            if f > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            if f == 0.0 {
                break;
            }
            let mut next = r - f * g / dg;
            let width = hi - lo;
            if !(next > lo && next < hi) || width > 0.5 * last_width {
                next = 0.5 * (lo + hi);
            }
            last_width = width;
            let step = (next - r).abs();
            r = next;
            if step <= 2.0 * f64::EPSILON * r || hi - lo <= 2.0 * f64::EPSILON * r {
                break;
            }
        }
        let residual = (self.g_unchecked(r) - s).abs();
        if residual > tol * s.max(1.0) {
            return Err(Error::NonConvergence {
                what: format!("g^-1({s}) (residual {residual:e})"),
                iterations: MAX_ITER,
            });
        }
        Ok(r)
    }

    /// Sampled `g'` on `count` equispaced interior points of `(0, 1)` up to `r_max`.
    pub fn monotonicity_certificate(&self, count: usize, r_max: f64) -> Vec<(f64, f64)> {
        (1..=count)
            .map(|i| {
                let r = r_max * i as f64 / (count + 1) as f64;
                (r, self.g_prime(r))
            })
            .collect()
    }
}

/// Radial map `x -> (phi(|x|)/|x|) x` Jacobian: `(phi/r) I + (phi' - phi/r) x^ x^T`.
fn radial_jacobian(x: &DVector<f64>, ratio: f64, derivative: f64) -> DMatrix<f64> {
    let n = x.len();
    let r = x.norm();
    let mut j = DMatrix::identity(n, n) * ratio;
    if r > 0.0 {
        let c = (derivative - ratio) / (r * r);
        for a in 0..n {
            for b in 0..n {
                j[(a, b)] += c * x[a] * x[b];
            }
        }
    }
    j
}

/// The diffeomorphism `h(x) = g^-1(|x|) x / |x|` from `R^n` onto the open unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallMap {
    pub dimension: usize,
    pub profile: RadialProfile,
    pub inverse_solver_tolerance: f64,
}

impl BallMap {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            profile: RadialProfile::default(),
            inverse_solver_tolerance: 1e-12,
        }
    }

    pub fn r_star(&self) -> f64 {
        self.profile.r_star
    }

    pub fn h(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let s = x.norm();
        if s == 0.0 {
            return Ok(DVector::zeros(x.len()));
        }
        if s <= self.profile.bridge_start {
            return Ok(x.clone());
        }
        let r = self.profile.g_inverse(s, self.inverse_solver_tolerance)?;
        Ok(x * (r / s))
    }

    pub fn h_inverse(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let r = u.norm();
        if r >= 1.0 {
            return Err(Error::Domain(format!("h^-1 needs |u| < 1, got {r}")));
        }
        if r == 0.0 {
            return Ok(DVector::zeros(u.len()));
        }
        if r <= self.profile.bridge_start {
            return Ok(u.clone());
        }
        let s = self.profile.g_unchecked(r);
        if !s.is_finite() {
            return Err(Error::Overflow(format!("h^-1 at radius {r}")));
        }
        Ok(u * (s / r))
    }

    /// `Dh(x)`.
    pub fn jacobian_h(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.h_with_jacobian(x)?.1)
    }

    /// `Dh^-1(u)`.
    pub fn jacobian_h_inverse(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.h_inverse_with_jacobian(u)?.1)
    }

    /// `h(x)` and `Dh(x)` from a single root solve.
    pub fn h_with_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let s = x.norm();
        let n = x.len();
        if s <= self.profile.bridge_start {
            return Ok((x.clone(), DMatrix::identity(n, n)));
        }
        let r = self.profile.g_inverse(s, self.inverse_solver_tolerance)?;
        let (_, dg) = self.profile.g_and_prime(r);
        Ok((x * (r / s), radial_jacobian(x, r / s, 1.0 / dg)))
    }

    /// `h^-1(u)` and `Dh^-1(u)`.
    pub fn h_inverse_with_jacobian(
        &self,
        u: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let r = u.norm();
        let n = u.len();
        if r >= 1.0 {
            return Err(Error::Domain(format!("h^-1 needs |u| < 1, got {r}")));
        }
        if r <= self.profile.bridge_start {
            return Ok((u.clone(), DMatrix::identity(n, n)));
        }
        let (g, dg) = self.profile.g_and_prime(r);
        if !g.is_finite() || !dg.is_finite() {
            return Err(Error::Overflow(format!("h^-1 at radius {r}")));
        }
        Ok((u * (g / r), radial_jacobian(u, g / r, dg)))
    }

    pub fn shift(&self, y: DVector<f64>) -> ShiftMap {
        ShiftMap { y, ball: *self }
    }
}

/// `s_y(x) = h(h^-1(x) + y)` on the ball below `r*`, identity elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftMap {
    pub y: DVector<f64>,
    pub ball: BallMap,
}

impl ShiftMap {
    pub fn new(y: DVector<f64>) -> Self {
        let ball = BallMap::new(y.len());
        Self { y, ball }
    }

    pub fn boundary_threshold(&self) -> f64 {
        self.ball.r_star()
    }

    fn is_identity_at(&self, x: &DVector<f64>) -> bool {
        self.y.iter().all(|v| *v == 0.0) || x.norm() >= self.ball.r_star()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.is_identity_at(x) {
            return Ok(x.clone());
        }
        let u = self.ball.h_inverse(x)?;
        self.ball.h(&(u + &self.y))
    }

    /// Value and Jacobian in one pass.
    pub fn apply_with_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = x.len();
        if self.is_identity_at(x) {
            return Ok((x.clone(), DMatrix::identity(n, n)));
        }
        let z = x + &self.y;
        let start = self.ball.profile.bridge_start;
        if x.norm() <= start && z.norm() <= start {
            return Ok((z, DMatrix::identity(n, n)));
        }
        let (u, inner) = self.ball.h_inverse_with_jacobian(x)?;
        let (value, outer) = self.ball.h_with_jacobian(&(u + &self.y))?;
        Ok((value, outer * inner))
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.apply_with_jacobian(x)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(a: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(a)
    }

    #[test]
    fn profile_branches() {
        let p = RadialProfile::default();
        assert_eq!(p.g(0.2).unwrap(), 0.2);
        let top = p.g(2.0 / 3.0).unwrap();
        assert!((top / 9f64.exp() - 1.0).abs() < 1e-13);
        assert!(p.g(0.0).is_err());
        assert!(p.g(1.0).is_err());
    }

    #[test]
    fn inverse_fixed_points() {
        let p = RadialProfile::default();
        assert_eq!(p.g_inverse(0.25, 1e-12).unwrap(), 0.25);
        let r = p.g_inverse(9f64.exp(), 1e-12).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-10);
        assert!(p.g_inverse(0.0, 1e-12).is_err());
        assert!(p.g_inverse(-1.0, 1e-12).is_err());
    }

    #[test]
    fn r_star_matches_threshold() {
        let p = RadialProfile::default();
        let g = p.g(p.r_star).unwrap();
        assert!((g / THRESHOLD_VALUE - 1.0).abs() < 1e-10);
    }

    #[test]
    fn h_is_identity_on_inner_ball() {
        let b = BallMap::new(2);
        let x = v(&[0.18, -0.24]);
        assert_eq!(b.h(&x).unwrap(), x);
        assert_eq!(b.h(&DVector::zeros(2)).unwrap(), DVector::zeros(2));
        assert_eq!(b.h_inverse(&x).unwrap(), x);
    }

    #[test]
    fn h_inverse_rejects_closed_ball_complement() {
        let b = BallMap::new(3);
        assert!(matches!(
            b.h_inverse(&v(&[1.0, 0.0, 0.0])),
            Err(Error::Domain(_))
        ));
        // Far beyond the threshold the closed form overflows.
        assert!(matches!(
            b.h_inverse(&v(&[0.0, 0.9999, 0.0])),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn shift_exact_cases() {
        let s = ShiftMap::new(v(&[0.05, -0.02]));
        let outside = v(&[1.2, 0.3]);
        assert_eq!(s.apply(&outside).unwrap(), outside);
        assert_eq!(s.jacobian(&outside).unwrap(), DMatrix::identity(2, 2));
        let inner = v(&[0.1, 0.1]);
        assert_eq!(s.apply(&inner).unwrap(), &inner + &s.y);
        assert_eq!(s.jacobian(&inner).unwrap(), DMatrix::identity(2, 2));
        let zero = ShiftMap::new(DVector::zeros(2));
        let x = v(&[0.5, 0.2]);
        assert_eq!(zero.apply(&x).unwrap(), x);
    }
}
