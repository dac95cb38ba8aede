//! Metric smoothing: `H~_eps`, the chart-localized `H_{e,i}`, Haar averaging and composition
//! over a finite atlas.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use super::field::{ensure_spd, MetricField, Regularity, SharedField};
use crate::ball::{BallMap, ShiftMap};
use crate::chart::AtlasChart;
use crate::error::{Error, Result};
use crate::group::GroupAction;
use crate::kernel::KernelRule;

/// Isometry residual above which a group is rejected for a metric.
pub const ISOMETRY_TOLERANCE: f64 = 1e-8;

/// `H~_eps(g)(x) = sum_j c_j (s_{y_j}^* g)(x)`; equal to `g(x)` wherever every `s_y` is the
/// identity (`|x| >= r*`).
#[derive(Clone)]
pub struct MollifiedMetric {
    base: SharedField,
    rule: KernelRule,
    shifts: Vec<ShiftMap>,
    r_star: f64,
}

impl MollifiedMetric {
    pub fn new(base: SharedField, rule: KernelRule) -> Result<Self> {
        let n = base.dimension();
        if rule.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rule.dimension(),
            });
        }
        let ball = BallMap::new(n);
        let shifts = rule.shifts.iter().map(|y| ball.shift(y.clone())).collect();
        Ok(Self {
            base,
            rule,
            shifts,
            r_star: ball.r_star(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.rule.epsilon
    }
}

impl MetricField for MollifiedMetric {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn value(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.norm() >= self.r_star {
            return self.base.value(x);
        }
        let n = x.len();
        let mut acc = DMatrix::zeros(n, n);
        for (s, c) in self.shifts.iter().zip(&self.rule.weights) {
            let (y, j) = s.apply_with_jacobian(x)?;
            acc += (j.transpose() * self.base.value(&y)? * j) * *c;
        }
        ensure_spd(&acc, x)?;
        Ok(acc)
    }
}

/// `H_{e,i}(g0) = (phi^-1)^* H~_eps(phi_* (h g0)) + (1 - h) g0` for an affine chart `phi`.
/// Outside `V` (and beyond `r*` in chart coordinates) the value is `g0(x)` itself.
#[derive(Clone)]
pub struct ChartSmoothedMetric {
    base: SharedField,
    chart: AtlasChart,
    rule: KernelRule,
    shifts: Vec<ShiftMap>,
    r_star: f64,
}

impl ChartSmoothedMetric {
    pub fn new(base: SharedField, chart: AtlasChart, rule: KernelRule) -> Result<Self> {
        let n = base.dimension();
        if rule.dimension() != n || chart.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rule.dimension().max(chart.dimension()),
            });
        }
        let ball = BallMap::new(n);
        let shifts = rule.shifts.iter().map(|y| ball.shift(y.clone())).collect();
        Ok(Self {
            base,
            chart,
            rule,
            shifts,
            r_star: ball.r_star(),
        })
    }

    pub fn chart(&self) -> &AtlasChart {
        &self.chart
    }
}

impl MetricField for ChartSmoothedMetric {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn value(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let u = self.chart.to_chart(x);
        if u.norm() >= self.r_star {
            return self.base.value(x);
        }
        let n = x.len();
        let mut acc = DMatrix::zeros(n, n);
        for (s, c) in self.shifts.iter().zip(&self.rule.weights) {
            let (su, j) = s.apply_with_jacobian(&u)?;
            let h = self.chart.cutoff_at_radius(su.norm());
            if h == 0.0 {
                continue;
            }
            let g = self.base.value(&self.chart.from_chart(&su))?;
            acc += (j.transpose() * g * j) * (c * h);
        }
        let rest = 1.0 - self.chart.cutoff_at_radius(u.norm());
        if rest != 0.0 {
            acc += self.base.value(x)? * rest;
        }
        ensure_spd(&acc, x)?;
        Ok(acc)
    }
}

/// `sum_g w_g (alpha^g)^* H`, with `alpha^g` linear orthogonal.
#[derive(Clone)]
pub struct HaarAveragedMetric {
    base: SharedField,
    group: GroupAction,
}

impl HaarAveragedMetric {
    pub fn new(base: SharedField, group: GroupAction) -> Result<Self> {
        if group.dimension != base.dimension() {
            return Err(Error::DimensionMismatch {
                expected: base.dimension(),
                found: group.dimension,
            });
        }
        Ok(Self { base, group })
    }
}

impl MetricField for HaarAveragedMetric {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn value(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = x.len();
        let mut acc = DMatrix::zeros(n, n);
        for (r, w) in self.group.elements.iter().zip(&self.group.haar_weights) {
            acc += (r.transpose() * self.base.value(&(r * x))? * r) * *w;
        }
        Ok(acc)
    }

    fn regularity(&self) -> Regularity {
        self.base.regularity()
    }
}

/// `max_{g, x} |(alpha^g)^* g(x) - g(x)|_inf` over `points` and the group's probe elements.
pub fn isometry_residual(
    field: &dyn MetricField,
    group: &GroupAction,
    points: &[DVector<f64>],
) -> Result<f64> {
    let mut worst = 0.0f64;
    let probes = group.probe_elements(8);
    for x in points {
        let base = field.value(x)?;
        for r in &probes {
            let pulled = r.transpose() * field.value(&(r * x))? * r;
            worst = worst.max((pulled - &base).amax());
        }
    }
    Ok(worst)
}

/// `H^G_i(g0)`: rejects groups that are not isometries of `g0` on `probe_points`.
pub fn haar_average_metric(
    g0: SharedField,
    chart: &AtlasChart,
    rule: &KernelRule,
    group: &GroupAction,
    probe_points: &[DVector<f64>],
) -> Result<HaarAveragedMetric> {
    let residual = isometry_residual(g0.as_ref(), group, probe_points)?;
    if residual > ISOMETRY_TOLERANCE {
        return Err(Error::NotIsometry {
            residual,
            tolerance: ISOMETRY_TOLERANCE,
        });
    }
    let smoothed: SharedField =
        Arc::new(ChartSmoothedMetric::new(g0, chart.clone(), rule.clone())?);
    HaarAveragedMetric::new(smoothed, group.clone())
}

/// Sequential composition `H^G_s o ... o H^G_1 (g0)` over the atlas; `rules` holds one kernel
/// rule per chart, or a single rule shared by all stages.
pub fn compose_hg(
    g0: SharedField,
    atlas: &[AtlasChart],
    rules: &[KernelRule],
    group: &GroupAction,
    probe_points: &[DVector<f64>],
) -> Result<SharedField> {
    if rules.is_empty() || (rules.len() != 1 && rules.len() != atlas.len()) {
        return Err(Error::Config(format!(
            "need 1 or {} kernel rules, got {}",
            atlas.len(),
            rules.len()
        )));
    }
    let mut current = g0;
    for (i, chart) in atlas.iter().enumerate() {
        let rule = &rules[if rules.len() == 1 { 0 } else { i }];
        current = Arc::new(haar_average_metric(
            current,
            chart,
            rule,
            group,
            probe_points,
        )?);
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::MollifierKernel;
    use crate::metric::field::{ConformalMetric, ConstantMetric};

    fn v(a: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(a)
    }

    fn rule(eps: f64) -> KernelRule {
        MollifierKernel::new(2, eps, 3).unwrap().rule()
    }

    #[test]
    fn constant_metric_fixed_on_inner_ball() {
        let g: SharedField = Arc::new(ConstantMetric::euclidean(2));
        let m = MollifiedMetric::new(g, rule(0.05)).unwrap();
        let x = v(&[0.1, 0.2]);
        assert_eq!(m.value(&x).unwrap(), DMatrix::identity(2, 2));
        assert_eq!(m.value(&v(&[1.2, 0.0])).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn chart_smoothing_is_local() {
        let g: SharedField = Arc::new(ConformalMetric::sphere(2));
        let chart = AtlasChart::new(vec![0.5, 0.0], 0.8);
        let m = ChartSmoothedMetric::new(g.clone(), chart, rule(0.1)).unwrap();
        for x in [v(&[1.35, 0.0]), v(&[-0.4, 0.3]), v(&[0.5, 0.85])] {
            assert_eq!(m.value(&x).unwrap(), g.value(&x).unwrap());
        }
    }

    #[test]
    fn rejects_non_isometric_group() {
        let g: SharedField = Arc::new(ConformalMetric::exponential(2, 0, 1.0));
        let group = GroupAction::cyclic(2, 4).unwrap();
        let pts = vec![v(&[0.3, 0.1])];
        let res = haar_average_metric(g, &AtlasChart::unit(2), &rule(0.1), &group, &pts);
        assert!(matches!(res, Err(Error::NotIsometry { .. })));
    }

    #[test]
    fn trivial_group_average_is_identity_operation() {
        let g: SharedField = Arc::new(ConformalMetric::sphere(2));
        let chart = AtlasChart::unit(2);
        let single = ChartSmoothedMetric::new(g.clone(), chart.clone(), rule(0.1)).unwrap();
        let avg =
            haar_average_metric(g, &chart, &rule(0.1), &GroupAction::trivial(2), &[]).unwrap();
        let x = v(&[0.2, -0.45]);
        assert_eq!(avg.value(&x).unwrap(), single.value(&x).unwrap());
    }
}
