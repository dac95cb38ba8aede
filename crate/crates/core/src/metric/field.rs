//! Symmetric tensor fields on chart domains, their jets, and the built-in model metrics.

use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

use crate::diffeo::Diffeo;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    Smooth,
    C11,
    PiecewiseC2,
}

/// How derivatives of a field are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { step: f64 },
}

pub const DEFAULT_FD_STEP: f64 = 1e-3;

impl Default for DerivativeMode {
    fn default() -> Self {
        DerivativeMode::FiniteDifference {
            step: DEFAULT_FD_STEP,
        }
    }
}

/// Value, first and second partial derivatives of a matrix field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: DMatrix<f64>,
    /// `first[k] = d_k g`.
    pub first: Vec<DMatrix<f64>>,
    /// `second[k][l] = d_k d_l g`.
    pub second: Vec<Vec<DMatrix<f64>>>,
}

/// A symmetric matrix field. Metrics are SPD; differences of metrics are merely symmetric.
pub trait MetricField: Send + Sync {
    fn dimension(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn regularity(&self) -> Regularity {
        Regularity::Smooth
    }

    /// Closed-form jet, if the field has one.
    fn analytic_jet(&self, _x: &DVector<f64>) -> Option<Result<Jet>> {
        None
    }

    /// Radii `r` of spheres `|x| = r` across which second derivatives jump.
    fn discontinuity_radii(&self) -> Vec<f64> {
        Vec::new()
    }
}

pub type SharedField = Arc<dyn MetricField>;

/// Central-difference jet: 9 evaluations in two dimensions, 19 in three.
pub fn finite_difference_jet(field: &dyn MetricField, x: &DVector<f64>, step: f64) -> Result<Jet> {
    let n = x.len();
    let at = |offsets: &[(usize, f64)]| {
        let mut y = x.clone();
        for &(k, s) in offsets {
            y[k] += s * step;
        }
        field.value(&y)
    };
    let value = field.value(x)?;
    let mut first = Vec::with_capacity(n);
    let mut second = vec![vec![DMatrix::zeros(n, n); n]; n];
    for k in 0..n {
        let p = at(&[(k, 1.0)])?;
        let m = at(&[(k, -1.0)])?;
        first.push((&p - &m) / (2.0 * step));
        second[k][k] = (p - &value * 2.0 + m) / (step * step);
    }
    for k in 0..n {
        for l in k + 1..n {
            let pp = at(&[(k, 1.0), (l, 1.0)])?;
            let pm = at(&[(k, 1.0), (l, -1.0)])?;
            let mp = at(&[(k, -1.0), (l, 1.0)])?;
            let mm = at(&[(k, -1.0), (l, -1.0)])?;
            let d = (pp - pm - mp + mm) / (4.0 * step * step);
            second[l][k] = d.clone();
            second[k][l] = d;
        }
    }
    Ok(Jet {
        value,
        first,
        second,
    })
}

/// Jet in the requested mode; analytic mode falls back to finite differences when the field has
/// no closed form.
pub fn jet(field: &dyn MetricField, x: &DVector<f64>, mode: DerivativeMode) -> Result<Jet> {
    match mode {
        DerivativeMode::Analytic => match field.analytic_jet(x) {
            Some(j) => j,
            None => finite_difference_jet(field, x, DEFAULT_FD_STEP),
        },
        DerivativeMode::FiniteDifference { step } => finite_difference_jet(field, x, step),
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Fails with `NotPositiveDefinite` unless `m` admits a Cholesky factorization.
pub fn ensure_spd(m: &DMatrix<f64>, x: &DVector<f64>) -> Result<()> {
    if m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            at: x.as_slice().to_vec(),
            min_eigenvalue: min_eigenvalue(m),
        });
    }
    Ok(())
}

/// A constant symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantMetric(pub DMatrix<f64>);

impl ConstantMetric {
    pub fn euclidean(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Self(DMatrix::identity(n, n) * c)
    }
}

impl MetricField for ConstantMetric {
    fn dimension(&self) -> usize {
        self.0.nrows()
    }

    fn value(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.0.clone())
    }

    fn analytic_jet(&self, _x: &DVector<f64>) -> Option<Result<Jet>> {
        let n = self.0.nrows();
        Some(Ok(Jet {
            value: self.0.clone(),
            first: vec![DMatrix::zeros(n, n); n],
            second: vec![vec![DMatrix::zeros(n, n); n]; n],
        }))
    }
}

/// Scalar factor with gradient and Hessian.
pub type FactorJet = Arc<dyn Fn(&DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) + Send + Sync>;

/// Conformally flat metric `u(x) delta`.
#[derive(Clone)]
pub struct ConformalMetric {
    dimension: usize,
    factor: FactorJet,
    regularity: Regularity,
    discontinuities: Vec<f64>,
    label: String,
}

impl fmt::Debug for ConformalMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConformalMetric")
            .field("label", &self.label)
            .field("dimension", &self.dimension)
            .finish()
    }
}

/// Radial profile `phi(s)` of `|x|^2 = s` with its first two derivatives.
pub type RadialFactor = fn(f64) -> (f64, f64, f64);

/// Knot `s0 = r0^2` of the C^{1,1} profile, with `r0 = 0.45`.
pub const C11_KNOT: f64 = 0.45 * 0.45;

fn sphere_factor(s: f64) -> (f64, f64, f64) {
    let d = 1.0 + s;
    (4.0 / (d * d), -8.0 / (d * d * d), 24.0 / (d * d * d * d))
}

fn poincare_factor(s: f64) -> (f64, f64, f64) {
    let d = 1.0 - s;
    (4.0 / (d * d), 8.0 / (d * d * d), 24.0 / (d * d * d * d))
}

fn c11_factor(s: f64) -> (f64, f64, f64) {
    if s <= C11_KNOT {
        (1.0 - 0.5 * s, -0.5, 0.0)
    } else {
        let t = s - C11_KNOT;
        (1.0 - 0.5 * s + t * t, -0.5 + 2.0 * t, 2.0)
    }
}

impl ConformalMetric {
    pub fn new(
        dimension: usize,
        factor: FactorJet,
        regularity: Regularity,
        label: impl Into<String>,
    ) -> Self {
        Self {
            dimension,
            factor,
            regularity,
            discontinuities: Vec::new(),
            label: label.into(),
        }
    }

    /// `phi(|x|^2) delta` from a radial profile in `s = |x|^2`.
    pub fn radial(
        dimension: usize,
        phi: RadialFactor,
        regularity: Regularity,
        label: impl Into<String>,
    ) -> Self {
        let factor: FactorJet = Arc::new(move |x: &DVector<f64>| {
            let s = x.norm_squared();
            let (p, dp, ddp) = phi(s);
            let grad = x * (2.0 * dp);
            let hess = DMatrix::identity(x.len(), x.len()) * (2.0 * dp)
                + (x * x.transpose()) * (4.0 * ddp);
            (p, grad, hess)
        });
        Self::new(dimension, factor, regularity, label)
    }

    /// Stereographic round sphere `4 delta / (1 + |x|^2)^2`, curvature `+1`.
    pub fn sphere(dimension: usize) -> Self {
        Self::radial(dimension, sphere_factor, Regularity::Smooth, "sphere")
    }

    /// Poincare ball `4 delta / (1 - |x|^2)^2`, curvature `-1`.
    pub fn poincare(dimension: usize) -> Self {
        Self::radial(dimension, poincare_factor, Regularity::Smooth, "poincare")
    }

    /// `phi(|x|^2) delta` with `phi(s) = 1 - s/2` for `s <= s0` and `1 - s/2 + (s - s0)^2` beyond:
    /// `C^{1,1}`, with second derivatives jumping across `|x| = 0.45`.
    pub fn radial_c11(dimension: usize) -> Self {
        let mut m = Self::radial(dimension, c11_factor, Regularity::C11, "radial_c11");
        m.discontinuities = vec![C11_KNOT.sqrt()];
        m
    }

    /// `exp(2 a x_axis) delta`.
    pub fn exponential(dimension: usize, axis: usize, a: f64) -> Self {
        let factor: FactorJet = Arc::new(move |x: &DVector<f64>| {
            let n = x.len();
            let u = (2.0 * a * x[axis]).exp();
            let mut grad = DVector::zeros(n);
            grad[axis] = 2.0 * a * u;
            let mut hess = DMatrix::zeros(n, n);
            hess[(axis, axis)] = 4.0 * a * a * u;
            (u, grad, hess)
        });
        Self::new(dimension, factor, Regularity::Smooth, "exponential")
    }

    /// `(1 + x_axis^2) delta`.
    pub fn quadratic(dimension: usize, axis: usize) -> Self {
        let factor: FactorJet = Arc::new(move |x: &DVector<f64>| {
            let n = x.len();
            let mut grad = DVector::zeros(n);
            grad[axis] = 2.0 * x[axis];
            let mut hess = DMatrix::zeros(n, n);
            hess[(axis, axis)] = 2.0;
            (1.0 + x[axis] * x[axis], grad, hess)
        });
        Self::new(dimension, factor, Regularity::Smooth, "quadratic")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The scalar factor, gradient and Hessian at `x`.
    pub fn factor(&self, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        (self.factor)(x)
    }
}

impl MetricField for ConformalMetric {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (u, _, _) = (self.factor)(x);
        Ok(DMatrix::identity(self.dimension, self.dimension) * u)
    }

    fn regularity(&self) -> Regularity {
        self.regularity
    }

    fn analytic_jet(&self, x: &DVector<f64>) -> Option<Result<Jet>> {
        let n = self.dimension;
        let id = DMatrix::<f64>::identity(n, n);
        let (u, grad, hess) = (self.factor)(x);
        Some(Ok(Jet {
            value: &id * u,
            first: (0..n).map(|k| &id * grad[k]).collect(),
            second: (0..n)
                .map(|k| (0..n).map(|l| &id * hess[(k, l)]).collect())
                .collect(),
        }))
    }

    fn discontinuity_radii(&self) -> Vec<f64> {
        self.discontinuities.clone()
    }
}

/// `c g`.
#[derive(Clone)]
pub struct ScaledMetric {
    pub base: SharedField,
    pub factor: f64,
}

impl MetricField for ScaledMetric {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn value(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.base.value(x)? * self.factor)
    }

    fn regularity(&self) -> Regularity {
        self.base.regularity()
    }

    fn analytic_jet(&self, x: &DVector<f64>) -> Option<Result<Jet>> {
        let c = self.factor;
        self.base.analytic_jet(x).map(|j| {
            j.map(|j| Jet {
                value: j.value * c,
                first: j.first.into_iter().map(|m| m * c).collect(),
                second: j
                    .second
                    .into_iter()
                    .map(|row| row.into_iter().map(|m| m * c).collect())
                    .collect(),
            })
        })
    }

    fn discontinuity_radii(&self) -> Vec<f64> {
        self.base.discontinuity_radii()
    }
}

/// `a - b`; symmetric but not a metric, used for seminorm distances.
#[derive(Clone)]
pub struct MetricDifference {
    pub a: SharedField,
    pub b: SharedField,
}

impl MetricField for MetricDifference {
    fn dimension(&self) -> usize {
        self.a.dimension()
    }

    fn value(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.a.value(x)? - self.b.value(x)?)
    }
}

/// `Phi^* g (x) = D Phi(x)^T g(Phi(x)) D Phi(x)`.
#[derive(Clone)]
pub struct PullbackMetric {
    pub base: SharedField,
    pub map: Arc<dyn Diffeo>,
}

impl MetricField for PullbackMetric {
    fn dimension(&self) -> usize {
        self.map.dimension()
    }

    fn value(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (y, j) = self.map.apply_with_jacobian(x)?;
        Ok(j.transpose() * self.base.value(&y)? * j)
    }

    fn regularity(&self) -> Regularity {
        self.base.regularity()
    }
}

pub fn pullback_metric(base: SharedField, map: Arc<dyn Diffeo>) -> PullbackMetric {
    PullbackMetric { base, map }
}

/// Values cached along the ray `{r e_1}` of a field invariant under rotations of the plane,
/// extended by `g(R x) = R g(x) R^T` with linear interpolation in `r`.
#[derive(Debug, Clone)]
pub struct RayCachedMetric {
    radii: Vec<f64>,
    values: Vec<DMatrix<f64>>,
}

impl RayCachedMetric {
    /// Samples `field` at `count` equispaced radii in `[0, r_max]` (two dimensions only).
    pub fn build(field: &dyn MetricField, r_max: f64, count: usize) -> Result<Self> {
        if field.dimension() != 2 {
            return Err(Error::UnsupportedDimension(field.dimension(), "2"));
        }
        if count < 2 {
            return Err(Error::Domain("ray cache needs at least two radii".into()));
        }
        let radii: Vec<f64> = (0..count)
            .map(|i| r_max * i as f64 / (count - 1) as f64)
            .collect();
        let values = radii
            .iter()
            .map(|&r| field.value(&DVector::from_vec(vec![r, 0.0])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { radii, values })
    }
}

impl MetricField for RayCachedMetric {
    fn dimension(&self) -> usize {
        2
    }

    fn value(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let r = x.norm();
        let r_max = *self.radii.last().expect("non-empty cache");
        if r > r_max * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "radius {r} outside cached ray [0, {r_max}]"
            )));
        }
        let h = self.radii[1];
        let pos = (r / h).min((self.radii.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.radii.len() - 2);
        let t = pos - i as f64;
        let g = &self.values[i] * (1.0 - t) + &self.values[i + 1] * t;
        if r == 0.0 {
            return Ok(g);
        }
        let (c, s) = (x[0] / r, x[1] / r);
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        Ok(&rot * g * rot.transpose())
    }
}
