//! Sample grids, discrete `W^{2,p}` and Hoelder-type seminorms, `a_nu`, and the constructive
//! epsilon selection.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::field::{
    jet, min_eigenvalue, DerivativeMode, Jet, MetricDifference, MetricField, SharedField,
};
use super::mollify::compose_hg;
use crate::chart::AtlasChart;
use crate::error::{Error, Result};
use crate::group::GroupAction;
use crate::kernel::MollifierKernel;

/// Regular grid on a box, optionally masked to a ball around the box center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Points per axis.
    pub resolution: usize,
    #[serde(default)]
    pub ball_radius: Option<f64>,
}

impl SampleGrid {
    pub fn cube(dimension: usize, half_width: f64, resolution: usize) -> Self {
        Self {
            lower: vec![-half_width; dimension],
            upper: vec![half_width; dimension],
            resolution,
            ball_radius: None,
        }
    }

    /// Points of the cube `[-r, r]^n` lying in the closed ball of radius `r`.
    pub fn ball(dimension: usize, radius: f64, resolution: usize) -> Self {
        Self {
            ball_radius: Some(radius),
            ..Self::cube(dimension, radius, resolution)
        }
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn spacing(&self) -> Vec<f64> {
        let m = (self.resolution.max(2) - 1) as f64;
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a) / m)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Same box at `2 (resolution - 1) + 1` points per axis; contains the original nodes.
    pub fn refined(&self) -> Self {
        Self {
            resolution: 2 * (self.resolution - 1) + 1,
            ..self.clone()
        }
    }

    pub fn points(&self) -> Vec<DVector<f64>> {
        let n = self.dimension();
        let h = self.spacing();
        let m = self.resolution;
        let center: Vec<f64> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let total = m.pow(n as u32);
        (0..total)
            .map(|mut k| {
                DVector::from_fn(n, |i, _| {
                    let idx = k % m;
                    k /= m;
                    if idx == m - 1 {
                        self.upper[i]
                    } else {
                        self.lower[i] + h[i] * idx as f64
                    }
                })
            })
            .filter(|p| match self.ball_radius {
                Some(r) => {
                    let d2: f64 = p.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum();
                    d2 <= r * r * (1.0 + 1e-12)
                }
                None => true,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    Infinity,
    Finite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeminormOrder {
    /// Sobolev `W^{2,p}` including the zeroth-order term.
    W2,
    /// `C^{1,alpha}` with `alpha = 1 - n/p`.
    Holder1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub exponent: Exponent,
    pub order: SeminormOrder,
    pub value: f64,
    pub points: usize,
    pub resolution: usize,
    /// Value on the once-refined grid, when requested.
    pub refined_value: Option<f64>,
    /// Whether refinement changed the value by at most 10%.
    pub stable: Option<bool>,
}

/// Relative drift allowed between a grid and its refinement.
pub const STABILITY_DRIFT: f64 = 0.10;

fn jets(
    field: &dyn MetricField,
    points: &[DVector<f64>],
    mode: DerivativeMode,
) -> Result<Vec<Jet>> {
    points.par_iter().map(|x| jet(field, x, mode)).collect()
}

fn component_max<F: Fn(usize, usize) -> f64>(n: usize, f: F) -> f64 {
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i..n {
            best = best.max(f(i, j));
        }
    }
    best
}

fn evaluate_seminorm(
    field: &dyn MetricField,
    exponent: Exponent,
    order: SeminormOrder,
    grid: &SampleGrid,
    mode: DerivativeMode,
) -> Result<(f64, usize)> {
    let n = field.dimension();
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::Domain("seminorm grid has no points".into()));
    }
    let js = jets(field, &points, mode)?;
    let derivs = |jt: &Jet, i: usize, j: usize| -> Vec<f64> {
        let mut out = vec![jt.value[(i, j)]];
        out.extend(jt.first.iter().map(|m| m[(i, j)]));
        if order == SeminormOrder::W2 {
            for k in 0..n {
                for l in 0..n {
                    out.push(jt.second[k][l][(i, j)]);
                }
            }
        }
        out
    };
    let value = match (order, exponent) {
        (SeminormOrder::W2, Exponent::Infinity) => component_max(n, |i, j| {
            js.iter()
                .flat_map(|jt| derivs(jt, i, j))
                .fold(0.0f64, |a, v| a.max(v.abs()))
        }),
        (SeminormOrder::W2, Exponent::Finite(p)) => {
            let vol = grid.cell_volume();
            component_max(n, |i, j| {
                let s: f64 = js
                    .iter()
                    .flat_map(|jt| derivs(jt, i, j))
                    .map(|v| v.abs().powf(p))
                    .sum();
                (s * vol).powf(1.0 / p)
            })
        }
        (SeminormOrder::Holder1, exponent) => {
            let alpha = match exponent {
                Exponent::Infinity => 1.0,
                Exponent::Finite(p) => 1.0 - n as f64 / p,
            };
            if alpha <= 0.0 {
                return Err(Error::Domain(format!(
                    "Hoelder exponent 1 - n/p must be positive, got {alpha}"
                )));
            }
            component_max(n, |i, j| {
                let sup = js
                    .iter()
                    .flat_map(|jt| derivs(jt, i, j))
                    .fold(0.0f64, |a, v| a.max(v.abs()));
                let mut quotient = 0.0f64;
                for a in 0..points.len() {
                    for b in a + 1..points.len() {
                        let d = (&points[a] - &points[b]).norm();
                        let diff = (0..n)
                            .map(|k| (js[a].first[k][(i, j)] - js[b].first[k][(i, j)]).abs())
                            .fold(0.0f64, f64::max);
                        quotient = quotient.max(diff / d.powf(alpha));
                    }
                }
                sup + quotient
            })
        }
    };
    Ok((value, points.len()))
}

/// Discrete seminorm: max over components `i <= j` of the chosen norm of `g_ij`, with derivatives
/// from `mode`. With `refine`, the value is recomputed on the refined grid and flagged unstable
/// on more than 10% drift (not an error).
pub fn sobolev_seminorm(
    field: &dyn MetricField,
    exponent: Exponent,
    order: SeminormOrder,
    grid: &SampleGrid,
    mode: DerivativeMode,
    refine: bool,
) -> Result<SeminormReport> {
    let (value, points) = evaluate_seminorm(field, exponent, order, grid, mode)?;
    let (refined_value, stable) = if refine {
        let (r, _) = evaluate_seminorm(field, exponent, order, &grid.refined(), mode)?;
        let scale = value.abs().max(r.abs());
        let drift = if scale < 1e-12 {
            0.0
        } else {
            (r - value).abs() / scale
        };
        (Some(r), Some(drift <= STABILITY_DRIFT))
    } else {
        (None, None)
    };
    Ok(SeminormReport {
        exponent,
        order,
        value,
        points,
        resolution: grid.resolution,
        refined_value,
        stable,
    })
}

/// `|a - b|` in the `W^{2,inf}` seminorm on `grid`.
pub fn w2_inf_distance(
    a: SharedField,
    b: SharedField,
    grid: &SampleGrid,
    mode: DerivativeMode,
) -> Result<f64> {
    let diff = MetricDifference { a, b };
    Ok(sobolev_seminorm(
        &diff,
        Exponent::Infinity,
        SeminormOrder::W2,
        grid,
        mode,
        false,
    )?
    .value)
}

/// `a_nu`: the smallest eigenvalue of `gbar` over the grid.
pub fn a_nu(gbar: &dyn MetricField, grid: &SampleGrid) -> Result<f64> {
    let mins = grid
        .points()
        .par_iter()
        .map(|x| Ok(min_eigenvalue(&gbar.value(x)?)))
        .collect::<Result<Vec<f64>>>()?;
    let m = mins.into_iter().fold(f64::INFINITY, f64::min);
    if !(m > 0.0) {
        return Err(Error::NotPositiveDefinite {
            at: vec![],
            min_eigenvalue: m,
        });
    }
    Ok(m)
}

/// Search settings for [`select_epsilon_for_k`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSearch {
    /// Ladder rungs, strictly decreasing.
    pub epsilons: Vec<f64>,
    pub quadrature_level: u32,
    pub grid: SampleGrid,
    pub mode: DerivativeMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSelection {
    pub k: usize,
    pub epsilon: f64,
    pub deviation: f64,
    pub bound: f64,
    /// `(epsilon, deviation)` for every ladder rung evaluated.
    pub ladder: Vec<(f64, f64)>,
}

/// Deviation `|H^G(g0) - g0|_{W^{2,inf}}` at each ladder rung, computed lazily.
pub struct DeviationLadder<'a> {
    g0: SharedField,
    chart: &'a AtlasChart,
    group: &'a GroupAction,
    search: &'a EpsilonSearch,
    cache: Vec<Option<f64>>,
}

impl<'a> DeviationLadder<'a> {
    pub fn new(
        g0: SharedField,
        chart: &'a AtlasChart,
        group: &'a GroupAction,
        search: &'a EpsilonSearch,
    ) -> Self {
        Self {
            g0,
            chart,
            group,
            search,
            cache: vec![None; search.epsilons.len()],
        }
    }

    pub fn epsilon(&self, i: usize) -> f64 {
        self.search.epsilons[i]
    }

    /// Deviation at rung `i` if already computed.
    pub fn cached(&self, i: usize) -> Option<f64> {
        self.cache[i]
    }

    pub fn deviation(&mut self, i: usize) -> Result<f64> {
        if let Some(d) = self.cache[i] {
            return Ok(d);
        }
        let eps = self.epsilon(i);
        let rule =
            MollifierKernel::new(self.g0.dimension(), eps, self.search.quadrature_level)?.rule();
        let smoothed = compose_hg(
            self.g0.clone(),
            std::slice::from_ref(self.chart),
            &[rule],
            self.group,
            &[],
        )?;
        let d = w2_inf_distance(
            smoothed,
            self.g0.clone(),
            &self.search.grid,
            self.search.mode,
        )?;
        self.cache[i] = Some(d);
        Ok(d)
    }

    /// Largest ladder epsilon whose deviation is at most `a_nu / k`. Scanning from the top makes
    /// the answer non-increasing in `k`.
    pub fn select(&mut self, k: usize, a_nu_value: f64) -> Result<EpsilonSelection> {
        if k == 0 {
            return Err(Error::Domain("k must be at least 1".into()));
        }
        let bound = a_nu_value / k as f64;
        let mut ladder = Vec::new();
        let mut best = f64::INFINITY;
        for i in 0..self.search.epsilons.len() {
            let d = self.deviation(i)?;
            ladder.push((self.epsilon(i), d));
            best = best.min(d);
            if d <= bound {
                return Ok(EpsilonSelection {
                    k,
                    epsilon: self.epsilon(i),
                    deviation: d,
                    bound,
                    ladder,
                });
            }
        }
        Err(Error::EpsilonNotFound {
            min: self.search.epsilons.last().copied().unwrap_or(f64::NAN),
            max: self.search.epsilons.first().copied().unwrap_or(f64::NAN),
            bound,
            achieved: best,
        })
    }
}

/// The largest tested `eps` with `|H^G(g0) - g0|_{W^{2,inf}} <= a_nu / k`.
pub fn select_epsilon_for_k(
    g0: SharedField,
    chart: &AtlasChart,
    group: &GroupAction,
    k: usize,
    a_nu_value: f64,
    search: &EpsilonSearch,
) -> Result<EpsilonSelection> {
    DeviationLadder::new(g0, chart, group, search).select(k, a_nu_value)
}

/// Shared handle helper.
pub fn shared<F: MetricField + 'static>(f: F) -> SharedField {
    Arc::new(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::field::{ConformalMetric, ConstantMetric};

    #[test]
    fn grid_counts() {
        let g = SampleGrid::cube(2, 1.0, 5);
        assert_eq!(g.points().len(), 25);
        assert_eq!(g.refined().resolution, 9);
        let b = SampleGrid::ball(2, 1.0, 5);
        assert_eq!(b.points().len(), 13);
        assert!(g.points().iter().any(|p| p[0] == 1.0 && p[1] == 1.0));
    }

    #[test]
    fn constant_seminorm_is_its_size() {
        let g = ConstantMetric::scaled_identity(2, 3.0);
        let r = sobolev_seminorm(
            &g,
            Exponent::Infinity,
            SeminormOrder::W2,
            &SampleGrid::ball(2, 1.0, 9),
            DerivativeMode::Analytic,
            true,
        )
        .unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.stable, Some(true));
    }

    #[test]
    fn quadratic_second_derivative() {
        let g = ConformalMetric::quadratic(2, 0);
        let grid = SampleGrid::cube(2, 0.5, 11);
        let r = sobolev_seminorm(
            &g,
            Exponent::Infinity,
            SeminormOrder::W2,
            &grid,
            DerivativeMode::Analytic,
            false,
        )
        .unwrap();
        // max(|1 + x^2|, |2x|, 2) = 2 on [-0.5, 0.5]^2.
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn a_nu_values() {
        assert_eq!(
            a_nu(&ConstantMetric::euclidean(2), &SampleGrid::ball(2, 1.0, 7)).unwrap(),
            1.0
        );
        assert_eq!(
            a_nu(
                &ConstantMetric::scaled_identity(2, 4.0),
                &SampleGrid::ball(2, 1.0, 7)
            )
            .unwrap(),
            4.0
        );
        let s = a_nu(&ConformalMetric::sphere(2), &SampleGrid::ball(2, 1.0, 7)).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holder_needs_positive_alpha() {
        let g = ConstantMetric::euclidean(2);
        let grid = SampleGrid::cube(2, 0.5, 3);
        let bad = sobolev_seminorm(
            &g,
            Exponent::Finite(2.0),
            SeminormOrder::Holder1,
            &grid,
            DerivativeMode::Analytic,
            false,
        );
        assert!(bad.is_err());
        let ok = sobolev_seminorm(
            &g,
            Exponent::Finite(4.0),
            SeminormOrder::Holder1,
            &grid,
            DerivativeMode::Analytic,
            false,
        )
        .unwrap();
        assert_eq!(ok.value, 1.0);
    }
}
