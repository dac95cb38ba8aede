//! Experiment configuration: a JSON file naming a scenario plus optional overrides, resolved
//! against per-experiment defaults.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::currents::{CurrentSpec, FormSpec};
use crate::error::{Error, Result};
use crate::metric::DEFAULT_FD_STEP;
use crate::scenario::{SCENARIO_DIMENSION, SCENARIO_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MollifyCurrent,
    SmoothMetric,
    CurvatureReport,
    LipschitzSweep,
    InvarianceCheck,
    SelectEpsilon,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::MollifyCurrent,
        ExperimentKind::SmoothMetric,
        ExperimentKind::CurvatureReport,
        ExperimentKind::LipschitzSweep,
        ExperimentKind::InvarianceCheck,
        ExperimentKind::SelectEpsilon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MollifyCurrent => "mollify-current",
            ExperimentKind::SmoothMetric => "smooth-metric",
            ExperimentKind::CurvatureReport => "curvature-report",
            ExperimentKind::LipschitzSweep => "lipschitz-sweep",
            ExperimentKind::InvarianceCheck => "invariance-check",
            ExperimentKind::SelectEpsilon => "select-epsilon",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

/// Geometric schedule `epsilon_max * ratio^i`, `i = 0..steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub epsilon_max: f64,
    pub ratio: f64,
    /// Number of values in the schedule.
    pub steps: usize,
}

impl EpsilonSchedule {
    pub fn values(&self) -> Vec<f64> {
        (0..self.steps)
            .map(|i| self.epsilon_max * self.ratio.powi(i as i32))
            .collect()
    }
}

/// The file format. Everything except `scenario` is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// Explicit epsilon list; overrides `schedule`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<EpsilonSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_level: Option<u32>,
    /// Points per axis of the sampling grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Circle quadrature size for torus actions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sections_per_point: Option<usize>,
    /// Point pairs for the dilation estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<usize>>,
    /// Replaces the scenario's current bank.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currents: Option<Vec<CurrentSpec>>,
    /// Replaces the standard form bank; forms are matched to currents by degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forms: Option<Vec<FormSpec>>,
}

/// A configuration with every field filled in for one experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub kind: ExperimentKind,
    pub scenario: String,
    pub epsilons: Vec<f64>,
    pub quadrature_level: u32,
    pub grid: usize,
    pub group_nodes: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub fd_step: f64,
    pub sections_per_point: usize,
    pub pairs: usize,
    pub k_values: Vec<usize>,
    pub currents: Option<Vec<CurrentSpec>>,
    pub forms: Option<Vec<FormSpec>>,
}

pub const DEFAULT_SEED: u64 = 42;

fn default_schedule(kind: ExperimentKind, scenario: &str) -> EpsilonSchedule {
    let geometric = |epsilon_max, ratio, steps| EpsilonSchedule {
        epsilon_max,
        ratio,
        steps,
    };
    match (kind, scenario) {
        (ExperimentKind::MollifyCurrent, _) => geometric(0.2, 0.5, 4),
        (ExperimentKind::InvarianceCheck, _) => geometric(0.1, 0.5, 3),
        (ExperimentKind::SmoothMetric, "round_sphere_chart") => geometric(0.05, 0.25, 9),
        (ExperimentKind::CurvatureReport, "radial_c11") => geometric(0.05, 0.25, 5),
        (ExperimentKind::LipschitzSweep, _) => geometric(0.05, 0.25, 4),
        (ExperimentKind::SelectEpsilon, _) => geometric(0.05, 0.25, 8),
        _ => geometric(0.05, 0.25, 4),
    }
}

fn default_grid(kind: ExperimentKind, scenario: &str) -> usize {
    match (kind, scenario) {
        (ExperimentKind::SmoothMetric, "round_sphere_chart") => 25,
        (ExperimentKind::LipschitzSweep, "radial_c11") => 41,
        (ExperimentKind::LipschitzSweep, _) => 17,
        (ExperimentKind::CurvatureReport, "radial_c11") => 91,
        _ => 13,
    }
}

fn default_level(scenario: &str) -> u32 {
    match scenario {
        "radial_c11" => 3,
        "strip_two_charts" => 2,
        _ => 4,
    }
}

impl ExperimentConfig {
    pub fn for_scenario(scenario: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            ..Self::default()
        }
    }

    /// Checks every present field; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::Config(format!("{field}: {why}")));
        if !SCENARIO_NAMES.contains(&self.scenario.as_str()) {
            return bad(
                "scenario",
                format!(
                    "unknown scenario '{}'; available: {}",
                    self.scenario,
                    SCENARIO_NAMES.join(", ")
                ),
            );
        }
        if let Some(eps) = &self.epsilons {
            if eps.is_empty() {
                return bad("epsilons", "must not be empty".into());
            }
            if let Some(e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
                return bad("epsilons", format!("values must be positive, got {e}"));
            }
            if eps.windows(2).any(|w| w[1] >= w[0]) {
                return bad("epsilons", "values must be strictly decreasing".into());
            }
        }
        if let Some(s) = &self.schedule {
            if !(s.epsilon_max.is_finite() && s.epsilon_max > 0.0) {
                return bad(
                    "schedule.epsilon_max",
                    format!("must be positive, got {}", s.epsilon_max),
                );
            }
            if !(s.ratio > 0.0 && s.ratio < 1.0) {
                return bad(
                    "schedule.ratio",
                    format!("must lie in (0, 1), got {}", s.ratio),
                );
            }
            if s.steps == 0 {
                return bad("schedule.steps", "must be at least 1".into());
            }
        }
        if let Some(l) = self.quadrature_level {
            if !(1..=8).contains(&l) {
                return bad("quadrature_level", format!("must lie in 1..=8, got {l}"));
            }
        }
        if let Some(g) = self.grid {
            if g < 3 {
                return bad("grid", format!("must be at least 3, got {g}"));
            }
        }
        if let Some(n) = self.group_nodes {
            if n == 0 {
                return bad("group_nodes", "must be at least 1".into());
            }
        }
        if let Some(h) = self.fd_step {
            if !(h.is_finite() && h > 0.0 && h < 0.1) {
                return bad("fd_step", format!("must lie in (0, 0.1), got {h}"));
            }
        }
        if self.sections_per_point == Some(0) {
            return bad("sections_per_point", "must be at least 1".into());
        }
        if self.pairs == Some(0) {
            return bad("pairs", "must be at least 1".into());
        }
        if let Some(ks) = &self.k_values {
            if ks.is_empty() || ks.contains(&0) {
                return bad(
                    "k_values",
                    "must be a non-empty list of positive integers".into(),
                );
            }
        }
        for (i, c) in self.currents.iter().flatten().enumerate() {
            if c.dimension != SCENARIO_DIMENSION {
                return bad(
                    &format!("currents[{i}].dimension"),
                    format!("must be {SCENARIO_DIMENSION}"),
                );
            }
            if let Err(e) = c.build() {
                return bad(&format!("currents[{i}]"), e.to_string());
            }
        }
        for (i, f) in self.forms.iter().flatten().enumerate() {
            if f.center.len() != SCENARIO_DIMENSION {
                return bad(
                    &format!("forms[{i}].center"),
                    format!("must have length {SCENARIO_DIMENSION}"),
                );
            }
            if let Err(e) = f.build() {
                return bad(&format!("forms[{i}]"), e.to_string());
            }
        }
        Ok(())
    }

    /// Fills the defaults for `kind`.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<Settings> {
        self.validate()?;
        let epsilons = match (&self.epsilons, &self.schedule) {
            (Some(e), _) => e.clone(),
            (None, Some(s)) => s.values(),
            (None, None) => default_schedule(kind, &self.scenario).values(),
        };
        Ok(Settings {
            kind,
            scenario: self.scenario.clone(),
            epsilons,
            quadrature_level: self
                .quadrature_level
                .unwrap_or_else(|| default_level(&self.scenario)),
            grid: self
                .grid
                .unwrap_or_else(|| default_grid(kind, &self.scenario)),
            group_nodes: self.group_nodes.unwrap_or(64),
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("results")),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            fd_step: self.fd_step.unwrap_or(DEFAULT_FD_STEP),
            sections_per_point: self.sections_per_point.unwrap_or(8),
            pairs: self.pairs.unwrap_or(64),
            k_values: self.k_values.clone().unwrap_or_else(|| vec![1, 2, 4]),
            currents: self.currents.clone(),
            forms: self.forms.clone(),
        })
    }

    /// Replaces the schedule length, keeping its start and ratio (or the explicit list's prefix).
    pub fn with_epsilon_steps(mut self, kind: ExperimentKind, steps: usize) -> Self {
        match &mut self.epsilons {
            Some(list) => list.truncate(steps.max(1)),
            None => {
                let base = self
                    .schedule
                    .unwrap_or_else(|| default_schedule(kind, &self.scenario));
                self.schedule = Some(EpsilonSchedule { steps, ..base });
            }
        }
        self
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text)?;
    config.validate()?;
    Ok(config)
}

/// Reads and validates a JSON configuration file; parse errors carry line and column.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}
