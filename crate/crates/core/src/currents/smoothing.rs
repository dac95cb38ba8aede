//! Smoothing operators on currents: translation mollification `Z`, the ball-preserving
//! variant `Z~` built from the shift maps `s_y`, chart localization `T = h T + (1 - h) T`, and
//! the Haar-averaged equivariant operator.

use nalgebra::DVector;
use std::sync::Arc;

use super::current::{distance_to_simplex, Current, Density, Piece};
use super::forms::TestForm;
use crate::ball::{BallMap, ShiftMap};
use crate::chart::ChartCutoff;
use crate::diffeo::{ChartShift, Translation};
use crate::error::{Error, Result};
use crate::group::GroupAction;
use crate::kernel::KernelRule;

/// Residual above which a current is rejected as not group-invariant.
pub const INVARIANCE_TOLERANCE: f64 = 1e-8;

/// Maximum bisection depth when splitting simplices across the cutoff annulus.
pub const LOCALIZE_DEPTH: usize = 4;

fn check_rule(t: &Current, rule: &KernelRule) -> Result<()> {
    if rule.dimension() != t.dimension() {
        return Err(Error::DimensionMismatch {
            expected: t.dimension(),
            found: rule.dimension(),
        });
    }
    Ok(())
}

/// `Z T(omega) = sum_j c_j (tau_{y_j})_* T(omega)`.
pub fn smooth_z(t: &Current, omega: &TestForm, rule: &KernelRule) -> Result<f64> {
    check_rule(t, rule)?;
    let mut acc = 0.0;
    for (y, c) in rule.shifts.iter().zip(&rule.weights) {
        acc += c * t.pushforward_pairing(&Translation(y.clone()), omega)?;
    }
    Ok(acc)
}

/// `Z~ T(omega) = sum_j c_j (s_{y_j})_* T(omega)`. Pieces lying beyond `r*` are not moved by
/// any `s_y` and are paired directly, so `Z~ T = T` exactly for currents outside the ball.
pub fn smooth_z_tilde(t: &Current, omega: &TestForm, rule: &KernelRule) -> Result<f64> {
    check_rule(t, rule)?;
    let ball = BallMap::new(t.dimension());
    let shifts: Vec<ShiftMap> = rule.shifts.iter().map(|y| ball.shift(y.clone())).collect();
    let mut acc = 0.0;
    for piece in t.pieces() {
        if piece.min_norm() >= ball.r_star() {
            acc += t.pair_piece(piece, omega, None)?;
            continue;
        }
        let mut part = 0.0;
        for (s, c) in shifts.iter().zip(&rule.weights) {
            part += c * t.pair_piece(piece, omega, Some(s))?;
        }
        acc += part;
    }
    Ok(acc)
}

/// `(phi^-1)_* Z~ phi_* T(omega)` for an affine chart `phi`.
pub fn chart_z_tilde(
    t: &Current,
    omega: &TestForm,
    rule: &KernelRule,
    chart: &ChartCutoff,
) -> Result<f64> {
    check_rule(t, rule)?;
    let ball = BallMap::new(t.dimension());
    let maps: Vec<ChartShift<'_>> = rule
        .shifts
        .iter()
        .map(|y| ChartShift {
            chart,
            shift: ball.shift(y.clone()),
        })
        .collect();
    let center = DVector::from_column_slice(&chart.center);
    let mut acc = 0.0;
    for piece in t.pieces() {
        if piece.distance_to(&center) / chart.radius >= ball.r_star() {
            acc += t.pair_piece(piece, omega, None)?;
            continue;
        }
        let mut part = 0.0;
        for (m, c) in maps.iter().zip(&rule.weights) {
            part += c * t.pair_piece(piece, omega, Some(m))?;
        }
        acc += part;
    }
    Ok(acc)
}

enum Zone {
    Inside,
    Outside,
    Transitional,
}

fn zone(vertices: &[DVector<f64>], chart: &ChartCutoff, center: &DVector<f64>) -> Zone {
    if vertices
        .iter()
        .all(|v| chart.chart_radius(v) <= chart.inner_radius)
    {
        Zone::Inside
    } else if distance_to_simplex(center, vertices) >= chart.radius {
        Zone::Outside
    } else {
        Zone::Transitional
    }
}

fn bisect(vertices: &[DVector<f64>]) -> [Vec<DVector<f64>>; 2] {
    let mut best = (0, 1, -1.0);
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            let d = (&vertices[i] - &vertices[j]).norm();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let mid = (&vertices[best.0] + &vertices[best.1]) * 0.5;
    let mut a = vertices.to_vec();
    let mut b = vertices.to_vec();
    // Replacing one endpoint in each half keeps both orientations equal to the parent's.
    a[best.1] = mid.clone();
    b[best.0] = mid;
    [a, b]
}

fn with_factor(density: &Option<Density>, factor: Density) -> Density {
    match density.clone() {
        Some(d) => Arc::new(move |x: &DVector<f64>| d(x) * factor(x)),
        None => factor,
    }
}

/// Split `T` into `T' = h T` and `T'' = (1 - h) T` for the chart cutoff `h`.
pub fn localize(t: &Current, chart: &ChartCutoff) -> Result<(Current, Current)> {
    let n = t.dimension();
    let mut inner = Current::empty(n, t.degree());
    let mut outer = Current::empty(n, t.degree());
    let center = DVector::from_column_slice(&chart.center);
    for piece in t.pieces() {
        match piece {
            Piece::Dirac {
                point,
                frame,
                weight,
            } => {
                let h = chart.cutoff(point);
                if h == 1.0 {
                    inner.push(piece.clone())?;
                } else if h == 0.0 {
                    outer.push(piece.clone())?;
                } else {
                    inner.push(Piece::Dirac {
                        point: point.clone(),
                        frame: frame.clone(),
                        weight: weight * h,
                    })?;
                    outer.push(Piece::Dirac {
                        point: point.clone(),
                        frame: frame.clone(),
                        weight: weight * (1.0 - h),
                    })?;
                }
            }
            Piece::Simplex {
                vertices,
                multiplicity,
                density,
            } => {
                let mut stack = vec![(vertices.clone(), 0usize)];
                while let Some((verts, depth)) = stack.pop() {
                    let make = |d: Option<Density>| Piece::Simplex {
                        vertices: verts.clone(),
                        multiplicity: *multiplicity,
                        density: d,
                    };
                    match zone(&verts, chart, &center) {
                        Zone::Inside => inner.push(make(density.clone()))?,
                        Zone::Outside => outer.push(make(density.clone()))?,
                        Zone::Transitional if depth < LOCALIZE_DEPTH && t.degree() > 0 => {
                            let [a, b] = bisect(&verts);
                            stack.push((b, depth + 1));
                            stack.push((a, depth + 1));
                        }
                        Zone::Transitional => {
                            let c1 = chart.clone();
                            let c2 = chart.clone();
                            inner.push(make(Some(with_factor(
                                density,
                                Arc::new(move |x| c1.cutoff(x)),
                            ))))?;
                            outer.push(make(Some(with_factor(
                                density,
                                Arc::new(move |x| 1.0 - c2.cutoff(x)),
                            ))))?;
                        }
                    }
                }
            }
        }
    }
    Ok((inner, outer))
}

/// `max_{g, omega} |T((alpha^g)^* omega) - T(omega)|`; circle actions are probed at their
/// quadrature angles plus eight off-grid angles.
pub fn invariance_residual(t: &Current, group: &GroupAction, forms: &[TestForm]) -> Result<f64> {
    let mut worst = 0.0f64;
    for omega in forms {
        let base = t.evaluate(omega)?;
        for g in group.probe_elements(8) {
            let moved = t.evaluate(&omega.pullback_linear(&g))?;
            worst = worst.max((moved - base).abs());
        }
    }
    Ok(worst)
}

/// The operator `sum_g w_g (alpha^g)_* [ (phi^-1)_* Z~ phi_* (h T) + (1 - h) T ]` for a fixed
/// invariant current, with the localization computed once.
#[derive(Debug, Clone)]
pub struct EquivariantSmoother {
    inner: Current,
    outer: Current,
    rule: KernelRule,
    chart: ChartCutoff,
    group: GroupAction,
}

impl EquivariantSmoother {
    /// Rejects `T` when its invariance residual against `probe_forms` exceeds `tolerance`.
    pub fn new(
        t: &Current,
        rule: KernelRule,
        chart: ChartCutoff,
        group: GroupAction,
        probe_forms: &[TestForm],
        tolerance: f64,
    ) -> Result<Self> {
        check_rule(t, &rule)?;
        if group.dimension != t.dimension() {
            return Err(Error::DimensionMismatch {
                expected: t.dimension(),
                found: group.dimension,
            });
        }
        let residual = invariance_residual(t, &group, probe_forms)?;
        if residual > tolerance {
            return Err(Error::NotInvariant {
                residual,
                tolerance,
            });
        }
        let (inner, outer) = localize(t, &chart)?;
        Ok(Self {
            inner,
            outer,
            rule,
            chart,
            group,
        })
    }

    /// The chart-localized value `(phi^-1)_* Z~ phi_* (h T)(omega) + T''(omega)` without averaging.
    pub fn localized(&self, omega: &TestForm) -> Result<f64> {
        Ok(chart_z_tilde(&self.inner, omega, &self.rule, &self.chart)?
            + self.outer.evaluate(omega)?)
    }

    pub fn evaluate(&self, omega: &TestForm) -> Result<f64> {
        let mut acc = 0.0;
        for (g, w) in self.group.elements.iter().zip(&self.group.haar_weights) {
            acc += w * self.localized(&omega.pullback_linear(g))?;
        }
        Ok(acc)
    }

    pub fn parts(&self) -> (&Current, &Current) {
        (&self.inner, &self.outer)
    }
}

/// One-shot equivariant smoothing; invariance of `T` is checked against `omega` itself.
pub fn equivariant_z(
    t: &Current,
    omega: &TestForm,
    rule: &KernelRule,
    chart: &ChartCutoff,
    group: &GroupAction,
) -> Result<f64> {
    EquivariantSmoother::new(
        t,
        rule.clone(),
        chart.clone(),
        group.clone(),
        std::slice::from_ref(omega),
        INVARIANCE_TOLERANCE,
    )?
    .evaluate(omega)
}

/// Ratio `|Z^G T(omega)| / |T(omega)|` maximized over forms with `|T(omega)|` above `floor`;
/// an empirical stand-in for the unquantified boundedness constant.
pub fn empirical_bound_constant(pairs: &[(f64, f64)], floor: f64) -> f64 {
    pairs
        .iter()
        .filter(|(_, base)| base.abs() > floor)
        .map(|(smoothed, base)| smoothed.abs() / base.abs())
        .fold(0.0, f64::max)
}
