//! The radial bump mollifier `f_eps` and quadrature rules over its support ball.
//!
//! The profile is `psi(t) = exp(t^2 / (t^2 - 1)) / lambda_n` on `|t| < 1` and zero
//! elsewhere. `lambda_n` is chosen so that `f_eps(x) = eps^-n psi(|x| / eps)` has unit
//! mass over `R^n` (the n-dimensional normalization, not the one-dimensional one).

use nalgebra::DVector;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_integrate, gauss_legendre_on};

/// Beyond this `|t|` the exponent is not evaluated and the bump is exactly zero.
pub const BUMP_CUTOFF: f64 = 1.0 - 1.0 / (1u64 << 26) as f64;

/// Unnormalized bump `exp(t^2 / (t^2 - 1))`, zero for `|t| >= 1`.
pub fn unnormalized_bump(t: f64) -> f64 {
    let a = t.abs();
    if a.is_nan() || a >= BUMP_CUTOFF {
        return 0.0;
    }
    let t2 = t * t;
    (t2 / (t2 - 1.0)).exp()
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
pub fn sphere_surface(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // 2 pi^{n/2} / Gamma(n/2) via the recursion s_{n+2} = 2 pi s_n / n.
            let mut s = if n % 2 == 0 { 2.0 * PI } else { 4.0 * PI };
            let mut k = if n % 2 == 0 { 2 } else { 3 };
            while k < n {
                s *= 2.0 * PI / k as f64;
                k += 2;
            }
            s
        }
    }
}

/// Volume of the ball of radius `r` in `R^n`.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    sphere_surface(n) * r.powi(n as i32) / n as f64
}

/// `lambda_n = |S^{n-1}| * int_0^1 exp(r^2/(r^2-1)) r^{n-1} dr`, computed adaptively.
pub fn normalization_constant(n: usize, tolerance: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::UnsupportedDimension(n, "n >= 1"));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let surface = sphere_surface(n);
    let radial = adaptive_integrate(
        |r: f64| unnormalized_bump(r) * r.powi(n as i32 - 1),
        0.0,
        1.0,
        tolerance / surface,
        4096,
    )?;
    Ok(surface * radial)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpProfile {
    dimension: usize,
    lambda: f64,
}

impl BumpProfile {
    pub fn new(dimension: usize) -> Result<Self> {
        let lambda = normalization_constant(dimension, 1e-14)?;
        Ok(Self { dimension, lambda })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The normalized profile `psi(t)`.
    pub fn psi(&self, t: f64) -> f64 {
        unnormalized_bump(t) / self.lambda
    }
}

/// Nodes and weights over the closed ball `B(0, radius)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    pub level: u32,
    pub radius: f64,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of `w_j f(y_j)` in node order.
    pub fn integrate<F: Fn(&DVector<f64>) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * f(y))
            .sum()
    }
}

/// Polar/product rule over `B(0, epsilon)` in dimension `n in {1, 2, 3}`.
///
/// * `n = 1`: composite trapezoid with `2^level + 1` symmetric nodes on `[-eps, eps]`.
/// * `n = 2`: `2^level` Gauss radii (weight `r`) times `2^(level+1)` equispaced angles.
/// * `n = 3`: `2^level` Gauss radii (weight `r^2`), `2^level` Gauss nodes in `cos(theta)`,
///   `2^(level+1)` equispaced azimuths.
pub fn ball_quadrature(epsilon: f64, n: usize, level: u32) -> Result<QuadratureRule> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if level == 0 || level > 12 {
        return Err(Error::Domain(format!(
            "quadrature level must be in 1..=12, got {level}"
        )));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match n {
        1 => {
            let m = 1usize << level;
            let h = 2.0 * epsilon / m as f64;
            for i in 0..=m {
                let x = if 2 * i == m {
                    0.0
                } else {
                    -epsilon + h * i as f64
                };
                let w = if i == 0 || i == m { 0.5 * h } else { h };
                nodes.push(DVector::from_vec(vec![x]));
                weights.push(w);
            }
        }
        2 => {
            let nr = 1usize << level;
            let na = 1usize << (level + 1);
            let (r, wr) = radial_rule(nr, epsilon, 2);
            for (ri, wri) in r.iter().zip(&wr) {
                for k in 0..na {
                    let theta = 2.0 * PI * k as f64 / na as f64;
                    nodes.push(DVector::from_vec(vec![ri * theta.cos(), ri * theta.sin()]));
                    weights.push(wri * 2.0 * PI / na as f64);
                }
            }
        }
        3 => {
            let nr = 1usize << level;
            let nphi = 1usize << (level + 1);
            let (r, wr) = radial_rule(nr, epsilon, 3);
            let (c, wc) = gauss_legendre_on(nr, -1.0, 1.0);
            for (ri, wri) in r.iter().zip(&wr) {
                for (ci, wci) in c.iter().zip(&wc) {
                    let si = (1.0 - ci * ci).max(0.0).sqrt();
                    for k in 0..nphi {
                        let phi = 2.0 * PI * k as f64 / nphi as f64;
                        nodes.push(DVector::from_vec(vec![
                            ri * si * phi.cos(),
                            ri * si * phi.sin(),
                            ri * ci,
                        ]));
                        weights.push(wri * wci * 2.0 * PI / nphi as f64);
                    }
                }
            }
        }
        _ => return Err(Error::UnsupportedDimension(n, "n in {1, 2, 3}")),
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        level,
        radius: epsilon,
    })
}

/// Gauss radii on `[0, eps]` with the Jacobian `r^{n-1}` folded into the weights.
fn radial_rule(count: usize, epsilon: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (r, w) = gauss_legendre_on(count, 0.0, epsilon);
    let w = r
        .iter()
        .zip(&w)
        .map(|(ri, wi)| wi * ri.powi(n as i32 - 1))
        .collect();
    (r, w)
}

/// The scaled mollifier `f_eps` together with its quadrature rule.
#[derive(Debug, Clone)]
pub struct MollifierKernel {
    pub profile: BumpProfile,
    pub epsilon: f64,
    pub quadrature: QuadratureRule,
}

/// Discrete mollification weights `c_j` at shifts `y_j`: strictly positive and summing
/// to exactly `1.0` when accumulated in node order.
#[derive(Debug, Clone)]
pub struct KernelRule {
    pub shifts: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    pub epsilon: f64,
}

impl MollifierKernel {
    pub fn new(dimension: usize, epsilon: f64, level: u32) -> Result<Self> {
        let profile = BumpProfile::new(dimension)?;
        Self::with_profile(profile, epsilon, level)
    }

    pub fn with_profile(profile: BumpProfile, epsilon: f64, level: u32) -> Result<Self> {
        let quadrature = ball_quadrature(epsilon, profile.dimension(), level)?;
        Ok(Self {
            profile,
            epsilon,
            quadrature,
        })
    }

    pub fn dimension(&self) -> usize {
        self.profile.dimension()
    }

    /// `f_eps(x) = eps^-n psi(|x| / eps)`; exactly zero for `|x| >= eps`.
    pub fn f_eps(&self, x: &DVector<f64>) -> f64 {
        self.f_eps_radius(x.norm())
    }

    /// Kernel value as a function of `|x|` alone.
    pub fn f_eps_radius(&self, r: f64) -> f64 {
        let t = r / self.epsilon;
        if t >= 1.0 {
            return 0.0;
        }
        self.profile.psi(t) / self.epsilon.powi(self.dimension() as i32)
    }

    /// Quadrature mass `sum_j w_j f_eps(y_j)`; equals one up to quadrature error.
    pub fn mass(&self) -> f64 {
        self.quadrature.integrate(|y| self.f_eps(y))
    }

    /// Normalized discrete weights for the smoothing operators.
    pub fn rule(&self) -> KernelRule {
        let mut shifts = Vec::new();
        let mut raw = Vec::new();
        for (y, w) in self.quadrature.nodes.iter().zip(&self.quadrature.weights) {
            let v = w * self.f_eps(y);
            if v > 0.0 {
                shifts.push(y.clone());
                raw.push(v);
            }
        }
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|v| v / total).collect();
        // Absorb the rounding residue into the last weight so the ordered sum is exactly 1.
        if let Some(last) = weights.len().checked_sub(1) {
            let head: f64 = weights[..last].iter().sum();
            weights[last] = 1.0 - head;
        }
        KernelRule {
            shifts,
            weights,
            epsilon: self.epsilon,
        }
    }
}

impl KernelRule {
    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.shifts.first().map_or(0, |y| y.len())
    }

    /// The trivial rule (single zero shift with weight one); smoothing with it is the identity.
    pub fn identity(dimension: usize) -> Self {
        Self {
            shifts: vec![DVector::zeros(dimension)],
            weights: vec![1.0],
            epsilon: 0.0,
        }
    }
}
