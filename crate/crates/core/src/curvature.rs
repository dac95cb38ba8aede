//! Christoffel symbols, the Riemann tensor and sampled sectional-curvature bounds.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::field::{jet, DerivativeMode, Jet, MetricField, DEFAULT_FD_STEP};

/// `gamma[k][i][j] = Gamma^k_ij`.
pub type Christoffel = Vec<Vec<Vec<f64>>>;

fn inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    g.clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular metric matrix".into()))
}

pub fn christoffel_from_jet(j: &Jet) -> Result<Christoffel> {
    let n = j.value.nrows();
    let ginv = inverse(&j.value)?;
    let d = &j.first;
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for jj in i..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(k, l)] * (d[i][(jj, l)] + d[jj][(i, l)] - d[l][(i, jj)]);
                }
                gamma[k][i][jj] = 0.5 * s;
                gamma[k][jj][i] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

/// `Gamma^k_ij(x)`.
pub fn christoffel(
    field: &dyn MetricField,
    x: &DVector<f64>,
    mode: DerivativeMode,
) -> Result<Christoffel> {
    christoffel_from_jet(&jet(field, x, mode)?)
}

/// Fully covariant Riemann tensor `R_abcd`, indexed `[a][b][c][d]`, in the convention where
/// `R_abcd X^a Y^b X^c Y^d` is the sectional numerator (positive on the round sphere).
pub fn riemann_from_jet(j: &Jet) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    let n = j.value.nrows();
    let gamma = christoffel_from_jet(j)?;
    let g = &j.value;
    let dd = |a: usize, b: usize, r: usize, c: usize| j.second[a][b][(r, c)];
    let mut out = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v =
                        0.5 * (dd(b, c, a, d) + dd(a, d, b, c) - dd(a, c, b, d) - dd(b, d, a, c));
                    for e in 0..n {
                        for f in 0..n {
                            v += g[(e, f)]
                                * (gamma[e][b][c] * gamma[f][a][d]
                                    - gamma[e][b][d] * gamma[f][a][c]);
                        }
                    }
                    out[a][b][c][d] = v;
                }
            }
        }
    }
    Ok(out)
}

/// A point with a 2-plane spanned by Euclidean-orthonormalized vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSample {
    pub point: DVector<f64>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    /// Euclidean Gram determinant of the input pair.
    pub gram: f64,
}

pub const MIN_GRAM: f64 = 1e-8;

impl SectionSample {
    pub fn new(point: DVector<f64>, x: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        let gram = x.norm_squared() * y.norm_squared() - x.dot(&y).powi(2);
        if !(gram > MIN_GRAM) {
            return Err(Error::Degenerate(format!(
                "section Gram determinant {gram:e}"
            )));
        }
        let e1 = &x / x.norm();
        let y_perp = &y - &e1 * e1.dot(&y);
        let e2 = &y_perp / y_perp.norm();
        Ok(Self {
            point,
            x: e1,
            y: e2,
            gram,
        })
    }

    /// Plane from a QR of two Gaussian vectors.
    pub fn random(point: DVector<f64>, rng: &mut ChaCha8Rng) -> Result<Self> {
        let n = point.len();
        loop {
            let a = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            let b = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            match Self::new(point.clone(), a, b) {
                Err(Error::Degenerate(_)) => continue,
                other => return other,
            }
        }
    }
}

fn sectional_from_riemann(
    r: &[Vec<Vec<Vec<f64>>>],
    g: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<f64> {
    let n = x.len();
    let mut num = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    num += r[a][b][c][d] * x[a] * y[b] * x[c] * y[d];
                }
            }
        }
    }
    let gxx = (x.transpose() * g * x)[0];
    let gyy = (y.transpose() * g * y)[0];
    let gxy = (x.transpose() * g * y)[0];
    let den = gxx * gyy - gxy * gxy;
    if !(den > 0.0) {
        return Err(Error::Degenerate(format!(
            "section has metric Gram determinant {den:e}"
        )));
    }
    Ok(num / den)
}

/// `K_sigma = R(X, Y, Y, X) / (|X|^2 |Y|^2 - <X, Y>^2)`, all in the metric `g`.
/// With the index convention of [`riemann_from_jet`] the numerator is `R_abcd X^a Y^b X^c Y^d`.
pub fn sectional_curvature(
    field: &dyn MetricField,
    s: &SectionSample,
    mode: DerivativeMode,
) -> Result<f64> {
    let j = jet(field, &s.point, mode)?;
    sectional_from_riemann(&riemann_from_jet(&j)?, &j.value, &s.x, &s.y)
}

/// Sectional curvature of the plane spanned by arbitrary (non-orthonormalized) vectors.
pub fn sectional_curvature_of(
    field: &dyn MetricField,
    point: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    mode: DerivativeMode,
) -> Result<f64> {
    let j = jet(field, point, mode)?;
    sectional_from_riemann(&riemann_from_jet(&j)?, &j.value, x, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCurvature {
    pub point: Vec<f64>,
    pub k_min: f64,
    pub k_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub k_lower: f64,
    pub k_upper: f64,
    pub points_used: usize,
    pub points_excluded: usize,
    pub sections_per_point: usize,
    pub exclusion_radius: f64,
    pub map: Vec<PointCurvature>,
}

/// Settings for [`curvature_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsSampling {
    pub sections_per_point: usize,
    pub seed: u64,
    pub mode: DerivativeMode,
}

impl Default for BoundsSampling {
    fn default() -> Self {
        Self {
            sections_per_point: 8,
            seed: 42,
            mode: DerivativeMode::default(),
        }
    }
}

fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Essential curvature bounds: min and max of `K` over `points` times random sections, skipping
/// points within `2 h_fd` of the field's declared discontinuity spheres.
pub fn curvature_bounds(
    field: &dyn MetricField,
    points: &[DVector<f64>],
    sampling: BoundsSampling,
) -> Result<CurvatureBounds> {
    let h = match sampling.mode {
        DerivativeMode::FiniteDifference { step } => step,
        DerivativeMode::Analytic => DEFAULT_FD_STEP,
    };
    let exclusion_radius = 2.0 * h;
    let radii = field.discontinuity_radii();
    let keep: Vec<(usize, &DVector<f64>)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            radii
                .iter()
                .all(|r| (p.norm() - r).abs() > exclusion_radius)
        })
        .collect();
    let map = keep
        .par_iter()
        .map(|&(idx, p)| {
            let j = jet(field, p, sampling.mode)?;
            let r = riemann_from_jet(&j)?;
            let mut rng = ChaCha8Rng::seed_from_u64(point_seed(sampling.seed, idx));
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for _ in 0..sampling.sections_per_point.max(1) {
                let s = SectionSample::random(p.clone(), &mut rng)?;
                let k = sectional_from_riemann(&r, &j.value, &s.x, &s.y)?;
                lo = lo.min(k);
                hi = hi.max(k);
            }
            Ok(PointCurvature {
                point: p.as_slice().to_vec(),
                k_min: lo,
                k_max: hi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if map.is_empty() {
        return Err(Error::Domain(
            "no sample points left after excluding discontinuities".into(),
        ));
    }
    let k_lower = map.iter().map(|m| m.k_min).fold(f64::INFINITY, f64::min);
    let k_upper = map
        .iter()
        .map(|m| m.k_max)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CurvatureBounds {
        k_lower,
        k_upper,
        points_used: map.len(),
        points_excluded: points.len() - map.len(),
        sections_per_point: sampling.sections_per_point,
        exclusion_radius,
        map,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsComparison {
    pub upper_gap: f64,
    pub lower_gap: f64,
    pub delta: f64,
    pub pass: bool,
}

/// `|K_upper - K_upper^eps|` and `|K_lower - K_lower^eps|` against `delta`.
pub fn bounds_comparison(
    reference: (f64, f64),
    smoothed: (f64, f64),
    delta: f64,
) -> BoundsComparison {
    let lower_gap = (reference.0 - smoothed.0).abs();
    let upper_gap = (reference.1 - smoothed.1).abs();
    BoundsComparison {
        upper_gap,
        lower_gap,
        delta,
        pass: upper_gap < delta && lower_gap < delta,
    }
}

/// Tail proxy for `limsup K_upper^eps <= K_upper` and `liminf K_lower^eps >= K_lower`: the last
/// entry of an epsilon-decreasing series must respect both bounds up to `delta`.
pub fn limit_proxy(reference: (f64, f64), series: &[(f64, f64)], delta: f64) -> bool {
    match series.last() {
        Some(&(lo, hi)) => hi <= reference.1 + delta && lo >= reference.0 - delta,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::field::{ConformalMetric, ConstantMetric};

    fn v(a: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(a)
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let g = ConstantMetric::euclidean(3);
        let s = SectionSample::new(
            v(&[0.1, 0.2, 0.3]),
            v(&[1.0, 0.0, 0.0]),
            v(&[0.0, 1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(
            sectional_curvature(&g, &s, DerivativeMode::Analytic).unwrap(),
            0.0
        );
        let gamma = christoffel(&g, &v(&[0.0, 0.0, 0.0]), DerivativeMode::Analytic).unwrap();
        assert!(gamma.iter().flatten().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn sphere_sign_is_positive() {
        let g = ConformalMetric::sphere(2);
        let s = SectionSample::new(v(&[0.3, -0.2]), v(&[1.0, 0.0]), v(&[0.0, 1.0])).unwrap();
        let k = sectional_curvature(&g, &s, DerivativeMode::Analytic).unwrap();
        assert!((k - 1.0).abs() < 1e-12, "{k}");
        let p = ConformalMetric::poincare(3);
        let s = SectionSample::new(
            v(&[0.3, -0.2, 0.1]),
            v(&[1.0, 0.5, 0.0]),
            v(&[0.0, 1.0, 2.0]),
        )
        .unwrap();
        let k = sectional_curvature(&p, &s, DerivativeMode::Analytic).unwrap();
        assert!((k + 1.0).abs() < 1e-12, "{k}");
    }

    #[test]
    fn degenerate_section_is_rejected() {
        assert!(SectionSample::new(v(&[0.0, 0.0]), v(&[1.0, 1.0]), v(&[2.0, 2.0])).is_err());
    }

    #[test]
    fn comparison_of_identical_bounds() {
        let c = bounds_comparison((0.3, 1.2), (0.3, 1.2), 0.05);
        assert_eq!((c.upper_gap, c.lower_gap, c.pass), (0.0, 0.0, true));
        assert!(limit_proxy((0.3, 1.2), &[(0.1, 2.0), (0.29, 1.21)], 0.05));
    }
}
