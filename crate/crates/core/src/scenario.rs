//! Built-in scenarios: a base metric, an atlas, a group acting by isometries, and banks of
//! invariant currents and test forms.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::chart::AtlasChart;
use crate::currents::{standard_form_bank, Current, CurrentSpec, FormSpec, Piece, TestForm};
use crate::error::{Error, Result};
use crate::group::{plane_rotation, GroupAction, GroupKind};
use crate::metric::{
    isometry_residual, ConformalMetric, ConstantMetric, SampleGrid, SharedField, ISOMETRY_TOLERANCE,
};

/// Ambient dimension of every built-in scenario.
pub const SCENARIO_DIMENSION: usize = 2;

pub const SCENARIO_NAMES: [&str; 5] = [
    "euclid_z4",
    "round_sphere_chart",
    "radial_c11",
    "strip_two_charts",
    "orbit_currents",
];

/// Curvature bounds of the `C^{1,1}` radial metric on `|x| <= 0.9`, from a dense scan of the
/// closed-form curvature at radial step `1e-3` with a `2e-3` band around the kink removed.
pub const RADIAL_C11_BOUNDS: (f64, f64) = (-4.242363994969749, 1.3713055338986675);

/// Radius of the sampled domain for the ball scenarios.
pub const SPHERE_DOMAIN_RADIUS: f64 = 0.95;
pub const RADIAL_DOMAIN_RADIUS: f64 = 0.9;

/// Base point of the orbit currents.
pub const ORBIT_POINT: [f64; 2] = [0.2, 0.0];
/// Half width of the square loop.
pub const SQUARE_HALF_WIDTH: f64 = 0.3;
pub const FORM_PLATEAU: f64 = 2.0;
pub const FORM_SUPPORT: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct NamedCurrent {
    pub name: String,
    pub current: Current,
}

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    pub metric: SharedField,
    /// Whether `metric` is constant in chart coordinates.
    pub constant_metric: bool,
    /// `(K_lower, K_upper)` of the base metric when known.
    pub declared_bounds: Option<(f64, f64)>,
    pub atlas: Vec<AtlasChart>,
    pub group: GroupAction,
    /// Sampling domain; the resolution is a placeholder replaced by [`Scenario::grid`].
    pub domain: SampleGrid,
    pub currents: Vec<NamedCurrent>,
    /// Replacement for the standard form bank.
    pub custom_forms: Option<Vec<FormSpec>>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("declared_bounds", &self.declared_bounds)
            .field("charts", &self.atlas.len())
            .field("group_order", &self.group.order())
            .field("currents", &self.currents.len())
            .finish()
    }
}

impl Scenario {
    pub fn grid(&self, resolution: usize) -> SampleGrid {
        SampleGrid {
            resolution,
            ..self.domain.clone()
        }
    }

    /// Whether the group is the full rotation circle, so that fields are determined by a ray.
    pub fn is_rotation_invariant(&self) -> bool {
        matches!(self.group.kind, GroupKind::Circle { .. }) && self.dimension == 2
    }

    /// Points of a fundamental domain: the ray `[0, R] e_1` for circle actions, the full grid
    /// otherwise.
    pub fn sample_points(&self, resolution: usize) -> Vec<DVector<f64>> {
        if self.is_rotation_invariant() {
            let r = self.domain.ball_radius.unwrap_or(self.domain.upper[0]);
            let m = resolution.max(2);
            (0..m)
                .map(|i| DVector::from_vec(vec![r * i as f64 / (m - 1) as f64, 0.0]))
                .collect()
        } else {
            self.grid(resolution).points()
        }
    }

    /// The forms of `degree`: the custom bank if one was supplied, otherwise the standard bank
    /// of 12 forms centred at the origin.
    pub fn forms(&self, degree: usize) -> Result<Vec<TestForm>> {
        let specs = match &self.custom_forms {
            Some(specs) => specs
                .iter()
                .filter(|f| f.degree == degree)
                .cloned()
                .collect(),
            None => standard_form_bank(degree, FORM_PLATEAU, FORM_SUPPORT),
        };
        specs.iter().map(|s| s.build()).collect()
    }

    /// Replaces the current bank and, when given, the form bank.
    pub fn with_banks(
        mut self,
        currents: Option<&[CurrentSpec]>,
        forms: Option<&[FormSpec]>,
    ) -> Result<Self> {
        if let Some(specs) = currents {
            self.currents = specs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let name = if c.label.is_empty() {
                        format!("current_{i}")
                    } else {
                        c.label.clone()
                    };
                    Ok(NamedCurrent {
                        name,
                        current: c.build()?,
                    })
                })
                .collect::<Result<_>>()?;
        }
        if let Some(specs) = forms {
            self.custom_forms = Some(specs.to_vec());
        }
        Ok(self)
    }

    /// Maximum isometry residual of the group on a coarse domain grid.
    pub fn isometry_residual(&self) -> Result<f64> {
        isometry_residual(self.metric.as_ref(), &self.group, &self.grid(9).points())
    }

    /// Whether every domain point lies in some chart ball of relative radius `radius`
    /// (`inner_radius` for the cores `U_i`, just below 1 for the domains `V_i`).
    pub fn atlas_covers_domain(
        &self,
        resolution: usize,
        radius: impl Fn(&AtlasChart) -> f64,
    ) -> bool {
        self.grid(resolution)
            .points()
            .iter()
            .all(|x| self.atlas.iter().any(|c| c.chart_radius(x) <= radius(c)))
    }
}

fn v(a: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(a)
}

/// `sum_k delta_{R^k p}` over the quarter turns.
pub fn dirac_orbit() -> Current {
    let mut c = Current::empty(2, 0);
    for k in 0..4 {
        let p = plane_rotation(2, k as f64 * std::f64::consts::FRAC_PI_2) * v(&ORBIT_POINT);
        c.push(Piece::Dirac {
            point: p,
            frame: vec![],
            weight: 1.0,
        })
        .expect("valid Dirac piece");
    }
    c
}

/// Tangent unit vectors `R^k e_2` at the orbit points `R^k p`.
pub fn vector_orbit() -> Current {
    let mut c = Current::empty(2, 1);
    for k in 0..4 {
        let r = plane_rotation(2, k as f64 * std::f64::consts::FRAC_PI_2);
        c.push(Piece::Dirac {
            point: &r * v(&ORBIT_POINT),
            frame: vec![&r * v(&[0.0, 1.0])],
            weight: 1.0,
        })
        .expect("valid Dirac piece");
    }
    c
}

/// Counter-clockwise boundary of `[-a, a]^2`.
pub fn square_loop() -> Current {
    let a = SQUARE_HALF_WIDTH;
    Current::polygon(&[v(&[-a, -a]), v(&[a, -a]), v(&[a, a]), v(&[-a, a])])
        .expect("square is non-degenerate")
}

/// The square `[-a, a]^2` as four positively oriented triangles around the origin.
pub fn triangle_fan() -> Current {
    let a = SQUARE_HALF_WIDTH;
    let corners = [v(&[a, -a]), v(&[a, a]), v(&[-a, a]), v(&[-a, -a])];
    let pieces = (0..4)
        .map(|k| Piece::Simplex {
            vertices: vec![
                DVector::zeros(2),
                corners[k].clone(),
                corners[(k + 1) % 4].clone(),
            ],
            multiplicity: 1.0,
            density: None,
        })
        .collect();
    Current::from_pieces(2, 2, pieces).expect("fan triangles are non-degenerate")
}

fn orbit_bank() -> Vec<NamedCurrent> {
    [
        ("dirac_orbit", dirac_orbit()),
        ("vector_orbit", vector_orbit()),
        ("square_loop", square_loop()),
    ]
    .into_iter()
    .map(|(name, current)| NamedCurrent {
        name: name.into(),
        current,
    })
    .collect()
}

fn ball_domain(radius: f64) -> SampleGrid {
    SampleGrid::ball(2, radius, 2)
}

/// Looks up a built-in scenario; `group_nodes` sets the circle quadrature size where relevant.
pub fn scenario(name: &str, group_nodes: usize) -> Result<Scenario> {
    let s = match name {
        "euclid_z4" | "orbit_currents" => Scenario {
            name: name.into(),
            dimension: 2,
            metric: Arc::new(ConstantMetric::euclidean(2)),
            constant_metric: true,
            declared_bounds: Some((0.0, 0.0)),
            atlas: vec![AtlasChart::unit(2)],
            group: GroupAction::cyclic(2, 4)?,
            domain: ball_domain(SPHERE_DOMAIN_RADIUS),
            currents: orbit_bank(),
            custom_forms: None,
        },
        "round_sphere_chart" => Scenario {
            name: name.into(),
            dimension: 2,
            metric: Arc::new(ConformalMetric::sphere(2)),
            constant_metric: false,
            declared_bounds: Some((1.0, 1.0)),
            atlas: vec![AtlasChart::unit(2)],
            group: GroupAction::cyclic(2, 8)?,
            domain: ball_domain(SPHERE_DOMAIN_RADIUS),
            currents: Vec::new(),
            custom_forms: None,
        },
        "radial_c11" => Scenario {
            name: name.into(),
            dimension: 2,
            metric: Arc::new(ConformalMetric::radial_c11(2)),
            constant_metric: false,
            declared_bounds: Some(RADIAL_C11_BOUNDS),
            atlas: vec![AtlasChart::unit(2)],
            group: GroupAction::circle(2, group_nodes)?,
            domain: ball_domain(RADIAL_DOMAIN_RADIUS),
            currents: Vec::new(),
            custom_forms: None,
        },
        "strip_two_charts" => Scenario {
            name: name.into(),
            dimension: 2,
            metric: Arc::new(ConstantMetric(DMatrix::from_row_slice(
                2,
                2,
                &[2.0, 0.5, 0.5, 1.0],
            ))),
            constant_metric: true,
            declared_bounds: Some((0.0, 0.0)),
            atlas: vec![
                AtlasChart::new(vec![-0.5, 0.0], 1.2),
                AtlasChart::new(vec![0.5, 0.0], 1.2),
            ],
            group: GroupAction::trivial(2),
            domain: SampleGrid {
                lower: vec![-1.0, -0.3],
                upper: vec![1.0, 0.3],
                resolution: 2,
                ball_radius: None,
            },
            currents: Vec::new(),
            custom_forms: None,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown scenario '{other}'; available: {}",
                SCENARIO_NAMES.join(", ")
            )))
        }
    };
    let residual = s.isometry_residual()?;
    if residual > ISOMETRY_TOLERANCE {
        return Err(Error::NotIsometry {
            residual,
            tolerance: ISOMETRY_TOLERANCE,
        });
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_load() {
        for name in SCENARIO_NAMES {
            let s = scenario(name, 64).unwrap();
            assert_eq!(s.name, name);
            assert!(s.atlas_covers_domain(21, |_| 0.999), "{name}");
        }
    }

    #[test]
    fn strip_cores_cover_the_strip() {
        let s = scenario("strip_two_charts", 1).unwrap();
        assert!(s.atlas_covers_domain(41, |c| c.inner_radius));
    }

    #[test]
    fn unknown_name_lists_choices() {
        let err = scenario("torus", 64).unwrap_err().to_string();
        for name in SCENARIO_NAMES {
            assert!(err.contains(name));
        }
    }

    #[test]
    fn orbit_currents_are_invariant() {
        let s = scenario("orbit_currents", 64).unwrap();
        for c in &s.currents {
            let forms = s.forms(c.current.degree()).unwrap();
            let r = crate::currents::invariance_residual(&c.current, &s.group, &forms).unwrap();
            assert!(r < 1e-12, "{}: {r}", c.name);
        }
    }

    #[test]
    fn fan_area_and_loop_area_agree() {
        let s = scenario("orbit_currents", 64).unwrap();
        let area = s.forms(2).unwrap().into_iter().next().unwrap();
        let dx = s.forms(1).unwrap().into_iter().nth(2).unwrap();
        assert!((square_loop().evaluate(&dx).unwrap() + 0.36).abs() < 1e-12);
        let fan = triangle_fan().evaluate(&area).unwrap();
        assert!((fan - 0.36).abs() < 1e-12);
    }

    #[test]
    fn ray_sampling_for_circle_groups() {
        let s = scenario("radial_c11", 16).unwrap();
        let pts = s.sample_points(11);
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[10][0], RADIAL_DOMAIN_RADIUS);
        assert!(pts.iter().all(|p| p[1] == 0.0));
    }
}
