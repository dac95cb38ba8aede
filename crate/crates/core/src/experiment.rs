//! Experiment runners behind the CLI. Each run produces `results.csv` (one row per
//! `(epsilon, quantity)`), `summary.json` with the pass/fail checks, and kind-specific tables.

use nalgebra::DVector;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::ball::{BRIDGE_START, THRESHOLD_VALUE};
use crate::chart::AtlasChart;
use crate::config::{ExperimentConfig, ExperimentKind, Settings};
use crate::currents::smoothing::{empirical_bound_constant, INVARIANCE_TOLERANCE};
use crate::currents::{
    invariance_residual, smooth_z, smooth_z_tilde, Current, EquivariantSmoother, Piece, TestForm,
};
use crate::curvature::{bounds_comparison, curvature_bounds, limit_proxy, BoundsSampling};
use crate::distance::{dilation_estimate, length_deviation_bound, random_pairs, SampleGraph};
use crate::error::{Error, Result};
use crate::kernel::{KernelRule, MollifierKernel};
use crate::metric::seminorm::DeviationLadder;
use crate::metric::{
    a_nu, compose_hg, isometry_residual, w2_inf_distance, ChartSmoothedMetric, DerivativeMode,
    EpsilonSearch, MetricField, MollifiedMetric, RayCachedMetric, Regularity, SharedField,
};
use crate::scenario::{scenario, Scenario};

/// Final weak-convergence error allowed, relative to `max(1, |T(omega)|)`.
pub const WEAK_TOLERANCE: f64 = 0.02;
/// Errors below this count as converged when checking that a series decreases.
pub const SERIES_FLOOR: f64 = 1e-12;
pub const FINITE_INVARIANCE_TOLERANCE: f64 = 1e-10;
pub const TORUS_INVARIANCE_TOLERANCE: f64 = 1e-6;
/// Target for the `W^{2,inf}` deviation sweep.
pub const SEMINORM_DELTA: f64 = 0.01;
/// Allowed gap between smoothed and reference curvature bounds.
pub const BOUNDS_DELTA: f64 = 0.05;
pub const DILATION_TOLERANCE: f64 = 0.02;
/// Radii sampled when caching a rotation-invariant field along a ray.
pub const RAY_CACHE_RADII: usize = 400;
/// Grid used for `H^G` seminorms, which cost `|G|` times more than `H~`.
const GROUP_GRID_CAP: usize = 13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub epsilon: Option<f64>,
    pub quantity: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// An extra CSV file written next to `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub kind: ExperimentKind,
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    kind: &'a str,
    pass: bool,
    checks: &'a [Check],
}

/// 17 significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Report {
    fn new(scenario: &str, kind: ExperimentKind) -> Self {
        Self {
            scenario: scenario.into(),
            kind,
            rows: Vec::new(),
            checks: Vec::new(),
            tables: Vec::new(),
        }
    }

    fn row(
        &mut self,
        epsilon: Option<f64>,
        quantity: impl Into<String>,
        value: f64,
        tolerance: f64,
        pass: bool,
    ) {
        self.rows.push(Row {
            epsilon,
            quantity: quantity.into(),
            value,
            tolerance,
            pass,
        });
    }

    /// A row checked as `value <= tolerance`.
    fn bounded(
        &mut self,
        epsilon: Option<f64>,
        quantity: impl Into<String>,
        value: f64,
        tolerance: f64,
    ) {
        self.row(epsilon, quantity, value, tolerance, value <= tolerance);
    }

    fn check(&mut self, name: &str, value: f64, tolerance: f64, pass: bool) {
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance,
            pass,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from("epsilon,quantity,value,tolerance,pass\n");
        for r in &self.rows {
            let eps = r.epsilon.map(format_float).unwrap_or_default();
            let _ = writeln!(
                out,
                "{eps},{},{},{},{}",
                csv_field(&r.quantity),
                format_float(r.value),
                format_float(r.tolerance),
                r.pass
            );
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let checks: Vec<Check> = self
            .checks
            .iter()
            .map(|c| Check {
                value: json_safe(c.value),
                tolerance: json_safe(c.tolerance),
                ..c.clone()
            })
            .collect();
        let s = Summary {
            scenario: &self.scenario,
            kind: self.kind.name(),
            pass: self.passed(),
            checks: &checks,
        };
        serde_json::to_string_pretty(&s).expect("summary serializes") + "\n"
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.results_csv())?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        for t in &self.tables {
            let mut out = t.header.join(",") + "\n";
            for r in &t.rows {
                out += &r
                    .iter()
                    .map(|v| format_float(*v))
                    .collect::<Vec<_>>()
                    .join(",");
                out.push('\n');
            }
            std::fs::write(dir.join(&t.file_name), out)?;
        }
        Ok(())
    }
}

/// JSON has no infinities; unbounded tolerances are written as the largest double.
fn json_safe(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(f64::MIN, f64::MAX)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Every step strictly decreases, or has already reached `floor`.
pub fn is_decreasing(series: &[f64], floor: f64) -> bool {
    increases(series, floor) == 0
}

/// Number of steps that fail to decrease while still above `floor`.
pub fn increases(series: &[f64], floor: f64) -> usize {
    series
        .windows(2)
        .filter(|w| !(w[1] < w[0] || w[1] <= floor))
        .count()
}

fn rules(settings: &Settings, dimension: usize) -> Result<Vec<KernelRule>> {
    settings
        .epsilons
        .iter()
        .map(|&e| Ok(MollifierKernel::new(dimension, e, settings.quadrature_level)?.rule()))
        .collect()
}

fn fd_mode(settings: &Settings) -> DerivativeMode {
    DerivativeMode::FiniteDifference {
        step: settings.fd_step,
    }
}

fn invariance_tolerance(s: &Scenario) -> f64 {
    if s.group.is_finite() {
        FINITE_INVARIANCE_TOLERANCE
    } else {
        TORUS_INVARIANCE_TOLERANCE
    }
}

fn smoothed_metric(s: &Scenario, rule: &KernelRule) -> Result<SharedField> {
    compose_hg(
        s.metric.clone(),
        &s.atlas,
        std::slice::from_ref(rule),
        &s.group,
        &s.grid(5).points(),
    )
}

/// Output directory `<output_dir>/<scenario>/<kind>`.
pub fn output_path(settings: &Settings) -> PathBuf {
    settings
        .output_dir
        .join(&settings.scenario)
        .join(settings.kind.name())
}

/// Loads the scenario and runs one experiment kind.
pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig) -> Result<Report> {
    let settings = config.resolve(kind)?;
    run_with_settings(&settings)
}

pub fn run_with_settings(settings: &Settings) -> Result<Report> {
    let s = scenario(&settings.scenario, settings.group_nodes)?
        .with_banks(settings.currents.as_deref(), settings.forms.as_deref())?;
    let mut report = Report::new(&s.name, settings.kind);
    match settings.kind {
        ExperimentKind::MollifyCurrent => mollify_current(&s, settings, &mut report)?,
        ExperimentKind::SmoothMetric => smooth_metric(&s, settings, &mut report)?,
        ExperimentKind::CurvatureReport => curvature_report(&s, settings, &mut report)?,
        ExperimentKind::LipschitzSweep => lipschitz_sweep(&s, settings, &mut report)?,
        ExperimentKind::InvarianceCheck => invariance_check(&s, settings, &mut report)?,
        ExperimentKind::SelectEpsilon => select_epsilon(&s, settings, &mut report)?,
    }
    Ok(report)
}

/// Runs and writes the report; returns it with the directory used.
pub fn run_and_write(kind: ExperimentKind, config: &ExperimentConfig) -> Result<(Report, PathBuf)> {
    let settings = config.resolve(kind)?;
    let report = run_with_settings(&settings)?;
    let dir = output_path(&settings);
    report.write(&dir)?;
    Ok((report, dir))
}

fn require_currents(s: &Scenario) -> Result<()> {
    if s.currents.is_empty() {
        return Err(Error::Config(format!(
            "scenario '{}' has no currents",
            s.name
        )));
    }
    Ok(())
}

/// `T` moved by `v`.
pub fn translated(t: &Current, v: &DVector<f64>) -> Result<Current> {
    let pieces = t
        .pieces()
        .iter()
        .map(|p| match p.clone() {
            Piece::Dirac {
                point,
                frame,
                weight,
            } => Piece::Dirac {
                point: point + v,
                frame,
                weight,
            },
            Piece::Simplex {
                vertices,
                multiplicity,
                density,
            } => Piece::Simplex {
                vertices: vertices.into_iter().map(|x| x + v).collect(),
                multiplicity,
                density,
            },
        })
        .collect();
    Current::from_pieces(t.dimension(), t.degree(), pieces)
}

/// `(1 + x_0) dx^I` of the given degree supported in `B(center, support)`.
fn local_form(degree: usize, center: DVector<f64>, support: f64) -> Result<TestForm> {
    let index: Vec<usize> = (0..degree).collect();
    let coef: crate::currents::forms::Coefficient = Arc::new(|x: &DVector<f64>| 1.0 + x[0]);
    TestForm::new(
        center.len(),
        degree,
        center,
        0.5 * support,
        support,
        vec![(index, coef)],
    )
}

struct SeriesStats {
    worst_final: f64,
    not_decreasing: usize,
    failed_final: usize,
}

impl SeriesStats {
    fn new() -> Self {
        Self {
            worst_final: 0.0,
            not_decreasing: 0,
            failed_final: 0,
        }
    }

    fn record(
        &mut self,
        report: &mut Report,
        label: &str,
        epsilons: &[f64],
        errors: &[f64],
        scale: f64,
    ) {
        let tol = WEAK_TOLERANCE * scale;
        for (e, err) in epsilons.iter().zip(errors) {
            report.bounded(Some(*e), label, *err, tol);
        }
        let last = *errors.last().expect("non-empty sweep");
        self.worst_final = self.worst_final.max(last / scale);
        if !is_decreasing(errors, SERIES_FLOOR) {
            self.not_decreasing += 1;
        }
        if last > tol {
            self.failed_final += 1;
        }
    }

    fn finish(&self, report: &mut Report, name: &str) {
        report.check(
            &format!("{name}_weak_convergence"),
            self.worst_final,
            WEAK_TOLERANCE,
            self.failed_final == 0,
        );
        report.check(
            &format!("{name}_series_decreasing"),
            self.not_decreasing as f64,
            0.0,
            self.not_decreasing == 0,
        );
    }
}

fn mollify_current(s: &Scenario, settings: &Settings, report: &mut Report) -> Result<()> {
    require_currents(s)?;
    let rules = rules(settings, s.dimension)?;
    let eps = &settings.epsilons;
    let chart = &s.atlas[0];
    let (mut z, mut zt, mut zg) = (SeriesStats::new(), SeriesStats::new(), SeriesStats::new());
    let mut bound_pairs = Vec::new();
    for c in &s.currents {
        let t = &c.current;
        let forms = s.forms(t.degree())?;
        let smoothers = rules
            .iter()
            .map(|r| {
                EquivariantSmoother::new(
                    t,
                    r.clone(),
                    chart.clone(),
                    s.group.clone(),
                    &forms,
                    INVARIANCE_TOLERANCE,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        for w in &forms {
            let base = t.evaluate(w)?;
            let scale = base.abs().max(1.0);
            let tag = format!("[{}|{}]", c.name, w.label());
            let errs = rules
                .iter()
                .map(|r| Ok((smooth_z(t, w, r)? - base).abs()))
                .collect::<Result<Vec<_>>>()?;
            z.record(report, &format!("z_error{tag}"), eps, &errs, scale);
            if t.max_norm() < 1.0 {
                let errs = rules
                    .iter()
                    .map(|r| Ok((smooth_z_tilde(t, w, r)? - base).abs()))
                    .collect::<Result<Vec<_>>>()?;
                zt.record(report, &format!("z_tilde_error{tag}"), eps, &errs, scale);
            }
            let values = smoothers
                .iter()
                .map(|sm| sm.evaluate(w))
                .collect::<Result<Vec<_>>>()?;
            let errs: Vec<f64> = values.iter().map(|v| (v - base).abs()).collect();
            zg.record(report, &format!("z_g_error{tag}"), eps, &errs, scale);
            bound_pairs.push((*values.last().expect("non-empty sweep"), base));
        }
    }
    z.finish(report, "z");
    zt.finish(report, "z_tilde");
    zg.finish(report, "z_g");

    // Support: forms far from spt T see nothing; currents beyond the ball are fixed by Z~.
    let eps_max = eps.iter().cloned().fold(0.0, f64::max);
    let mut violations = 0usize;
    let shift = DVector::from_fn(s.dimension, |i, _| if i == 0 { 1.6 } else { 0.0 });
    for c in &s.currents {
        let t = &c.current;
        let center = DVector::from_fn(s.dimension, |i, _| if i == 0 { 2.5 } else { 0.0 });
        let far = local_form(t.degree(), center.clone(), 0.5)?;
        if t.distance_to(&center) - 0.5 > eps_max {
            for r in &rules {
                if smooth_z(t, &far, r)? != 0.0 || t.evaluate(&far)? != 0.0 {
                    violations += 1;
                }
            }
        }
        let outside = translated(t, &shift)?;
        if outside.min_norm() > 1.0 {
            for w in s.forms(t.degree())? {
                let exact = outside.evaluate(&w)?;
                for r in &rules {
                    if smooth_z_tilde(&outside, &w, r)? != exact {
                        violations += 1;
                    }
                }
            }
        }
    }
    report.bounded(None, "support_exactness_violations", violations as f64, 0.0);
    report.check("support_exact", violations as f64, 0.0, violations == 0);
    let c = empirical_bound_constant(&bound_pairs, SERIES_FLOOR);
    report.row(
        eps.last().copied(),
        "empirical_bound_constant",
        c,
        f64::INFINITY,
        c.is_finite(),
    );
    Ok(())
}

fn invariance_check(s: &Scenario, settings: &Settings, report: &mut Report) -> Result<()> {
    let rules = rules(settings, s.dimension)?;
    let probes = s.group.probe_elements(8);
    if !s.currents.is_empty() {
        let chart = &s.atlas[0];
        let mut worst = 0.0f64;
        for c in &s.currents {
            let t = &c.current;
            let forms = s.forms(t.degree())?;
            let input = invariance_residual(t, &s.group, &forms)?;
            report.bounded(
                None,
                format!("input_invariance_residual[{}]", c.name),
                input,
                INVARIANCE_TOLERANCE,
            );
            for (e, r) in settings.epsilons.iter().zip(&rules) {
                let sm = EquivariantSmoother::new(
                    t,
                    r.clone(),
                    chart.clone(),
                    s.group.clone(),
                    &forms,
                    INVARIANCE_TOLERANCE,
                )?;
                let (mut res_g, mut res_raw) = (0.0f64, 0.0f64);
                for w in &forms {
                    let base = sm.evaluate(w)?;
                    let raw = smooth_z(t, w, r)?;
                    for g in &probes {
                        let moved = w.pullback_linear(g);
                        res_g = res_g.max((sm.evaluate(&moved)? - base).abs());
                        res_raw = res_raw.max((smooth_z(t, &moved, r)? - raw).abs());
                    }
                }
                worst = worst.max(res_g);
                report.bounded(
                    Some(*e),
                    format!("z_g_invariance_residual[{}]", c.name),
                    res_g,
                    FINITE_INVARIANCE_TOLERANCE,
                );
                report.row(
                    Some(*e),
                    format!("z_raw_invariance_residual[{}]", c.name),
                    res_raw,
                    f64::INFINITY,
                    true,
                );
            }
        }
        report.check(
            "z_g_invariance",
            worst,
            FINITE_INVARIANCE_TOLERANCE,
            worst <= FINITE_INVARIANCE_TOLERANCE,
        );
    }
    let tol = invariance_tolerance(s);
    let points = s.grid(9).points();
    let mut worst = 0.0f64;
    for (e, r) in settings.epsilons.iter().zip(&rules) {
        let hg = smoothed_metric(s, r)?;
        let res = isometry_residual(hg.as_ref(), &s.group, &points)?;
        worst = worst.max(res);
        report.bounded(Some(*e), "h_g_invariance_residual", res, tol);
    }
    report.check("h_g_invariance", worst, tol, worst <= tol);
    Ok(())
}

/// Points at relative chart radius `>= 1` for `chart`, on rings around its center.
fn points_outside(chart: &AtlasChart) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    for k in 0..5 {
        let rho = chart.radius * (1.0 + 0.05 * k as f64);
        for a in 0..16 {
            let th = std::f64::consts::TAU * a as f64 / 16.0;
            out.push(DVector::from_vec(vec![
                chart.center[0] + rho * th.cos(),
                chart.center[1] + rho * th.sin(),
            ]));
        }
    }
    out
}

/// Whether every stage of the composition at `x` either shifts by pure translations with
/// cutoff 1 or is the identity, with a margin of `2 eps` in chart units.
fn in_translation_region(atlas: &[AtlasChart], x: &DVector<f64>, eps: f64) -> bool {
    let r_star = 1.0 - 1.0 / THRESHOLD_VALUE.ln().sqrt();
    atlas.iter().all(|c| {
        let u = c.chart_radius(x);
        u <= BRIDGE_START.min(c.inner_radius) - 2.0 * eps || u >= r_star + 2.0 * eps
    })
}

fn smooth_metric(s: &Scenario, settings: &Settings, report: &mut Report) -> Result<()> {
    let rules = rules(settings, s.dimension)?;
    let eps = &settings.epsilons;
    let mode = fd_mode(settings);
    let single_unit_chart = s.atlas.len() == 1 && s.atlas[0] == AtlasChart::unit(s.dimension);
    let grid = s.grid(settings.grid);
    let coarse = s.grid(settings.grid.min(GROUP_GRID_CAP));
    let smooth_base = s.metric.regularity() == Regularity::Smooth;

    let mut locality = 0usize;
    let mut tilde = Vec::new();
    let mut fixed_worst = 0.0f64;
    let mut fixed_points = 0usize;
    let mut last_hg: Option<SharedField> = None;
    for (e, r) in eps.iter().zip(&rules) {
        for chart in &s.atlas {
            let hei = ChartSmoothedMetric::new(s.metric.clone(), chart.clone(), r.clone())?;
            for x in points_outside(chart) {
                if hei.value(&x)? != s.metric.value(&x)? {
                    locality += 1;
                }
            }
        }
        if single_unit_chart {
            let ht: SharedField = Arc::new(MollifiedMetric::new(s.metric.clone(), r.clone())?);
            let d = w2_inf_distance(ht, s.metric.clone(), &grid, mode)?;
            report.bounded(Some(*e), "h_tilde_w2inf_deviation", d, SEMINORM_DELTA);
            tilde.push(d);
        }
        let hg = smoothed_metric(s, r)?;
        let d = w2_inf_distance(hg.clone(), s.metric.clone(), &coarse, mode)?;
        report.bounded(Some(*e), "h_g_w2inf_deviation", d, SEMINORM_DELTA);
        let min_eig = a_nu(hg.as_ref(), &coarse)?;
        report.row(Some(*e), "h_g_min_eigenvalue", min_eig, 0.0, min_eig > 0.0);
        if s.constant_metric {
            for x in grid
                .points()
                .iter()
                .filter(|x| in_translation_region(&s.atlas, x, *e))
            {
                fixed_points += 1;
                fixed_worst = fixed_worst.max((hg.value(x)? - s.metric.value(x)?).amax());
            }
        }
        last_hg = Some(hg);
    }
    report.bounded(None, "h_e_i_locality_violations", locality as f64, 0.0);
    report.check("h_e_i_locality", locality as f64, 0.0, locality == 0);
    if s.constant_metric {
        report.bounded(None, "constant_fixed_residual", fixed_worst, 1e-12);
        report.row(
            None,
            "constant_fixed_points",
            fixed_points as f64,
            1.0,
            fixed_points > 0,
        );
        report.check(
            "constant_fixed",
            fixed_worst,
            1e-12,
            fixed_worst <= 1e-12 && fixed_points > 0,
        );
    }
    if smooth_base {
        if !tilde.is_empty() {
            let best = tilde.iter().cloned().fold(f64::INFINITY, f64::min);
            let up = increases(&tilde, SERIES_FLOOR);
            report.check("h_tilde_seminorm_decreasing", up as f64, 0.0, up == 0);
            report.check(
                "h_tilde_seminorm_below_delta",
                best,
                SEMINORM_DELTA,
                best <= SEMINORM_DELTA,
            );
        }
    }
    if let Some(hg) = last_hg {
        let mut rows = Vec::new();
        for x in coarse.points() {
            let m = hg.value(&x)?;
            let ev = m.clone().symmetric_eigen().eigenvalues;
            let (lo, hi) = (ev.min(), ev.max());
            let mut row: Vec<f64> = x.iter().copied().collect();
            for i in 0..m.nrows() {
                for j in i..m.ncols() {
                    row.push(m[(i, j)]);
                }
            }
            row.extend([lo, hi]);
            rows.push(row);
        }
        let n = s.dimension;
        let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        for i in 0..n {
            for j in i..n {
                header.push(format!("g{i}{j}"));
            }
        }
        header.extend(["lambda_min".into(), "lambda_max".into()]);
        report.tables.push(Table {
            file_name: "grid.csv".into(),
            header,
            rows,
        });
    }
    Ok(())
}

fn curvature_report(s: &Scenario, settings: &Settings, report: &mut Report) -> Result<()> {
    let rules = rules(settings, s.dimension)?;
    let points = s.sample_points(settings.grid);
    let sampling = BoundsSampling {
        sections_per_point: settings.sections_per_point,
        seed: settings.seed,
        mode: DerivativeMode::Analytic,
    };
    let base = curvature_bounds(s.metric.as_ref(), &points, sampling)?;
    let reference = s.declared_bounds.unwrap_or((base.k_lower, base.k_upper));
    let base_gap = bounds_comparison(reference, (base.k_lower, base.k_upper), BOUNDS_DELTA);
    report.row(None, "base_k_lower", base.k_lower, f64::INFINITY, true);
    report.row(None, "base_k_upper", base.k_upper, f64::INFINITY, true);
    report.row(None, "declared_k_lower", reference.0, f64::INFINITY, true);
    report.row(None, "declared_k_upper", reference.1, f64::INFINITY, true);
    let base_worst = base_gap.lower_gap.max(base_gap.upper_gap);
    report.check(
        "base_bounds_match_declared",
        base_worst,
        BOUNDS_DELTA,
        base_gap.pass,
    );

    let mut map_rows: Vec<Vec<f64>> = base
        .map
        .iter()
        .map(|p| [vec![0.0], p.point.clone(), vec![p.k_min, p.k_max]].concat())
        .collect();
    let mut series = Vec::new();
    let mut any_pass = false;
    let mut last_gap = f64::INFINITY;
    for (e, r) in settings.epsilons.iter().zip(&rules) {
        let hg = smoothed_metric(s, r)?;
        let b = curvature_bounds(
            hg.as_ref(),
            &points,
            BoundsSampling {
                mode: fd_mode(settings),
                ..sampling
            },
        )?;
        let cmp = bounds_comparison(reference, (b.k_lower, b.k_upper), BOUNDS_DELTA);
        report.row(Some(*e), "k_lower", b.k_lower, f64::INFINITY, true);
        report.row(Some(*e), "k_upper", b.k_upper, f64::INFINITY, true);
        report.bounded(Some(*e), "k_lower_gap", cmp.lower_gap, BOUNDS_DELTA);
        report.bounded(Some(*e), "k_upper_gap", cmp.upper_gap, BOUNDS_DELTA);
        any_pass |= cmp.pass;
        last_gap = cmp.lower_gap.max(cmp.upper_gap);
        series.push((b.k_lower, b.k_upper));
        map_rows.extend(
            b.map
                .iter()
                .map(|p| [vec![*e], p.point.clone(), vec![p.k_min, p.k_max]].concat()),
        );
    }
    report.check(
        "bounds_preserved_at_final_epsilon",
        last_gap,
        BOUNDS_DELTA,
        last_gap < BOUNDS_DELTA,
    );
    report.check(
        "bounds_preserved_in_sweep",
        last_gap,
        BOUNDS_DELTA,
        any_pass,
    );
    report.check(
        "limit_proxy",
        last_gap,
        BOUNDS_DELTA,
        limit_proxy(reference, &series, BOUNDS_DELTA),
    );
    let mut header = vec!["epsilon".to_string()];
    header.extend((0..s.dimension).map(|i| format!("x{i}")));
    header.extend(["k_min".into(), "k_max".into()]);
    report.tables.push(Table {
        file_name: "curvature_map.csv".into(),
        header,
        rows: map_rows,
    });
    Ok(())
}

/// `H^G` ready for many evaluations: cached along a ray when rotation invariant.
fn evaluation_field(s: &Scenario, rule: &KernelRule, r_max: f64) -> Result<SharedField> {
    let hg = smoothed_metric(s, rule)?;
    if s.is_rotation_invariant() {
        Ok(Arc::new(RayCachedMetric::build(
            hg.as_ref(),
            r_max,
            RAY_CACHE_RADII,
        )?))
    } else {
        Ok(hg)
    }
}

fn lipschitz_sweep(s: &Scenario, settings: &Settings, report: &mut Report) -> Result<()> {
    let rules = rules(settings, s.dimension)?;
    let (lower, upper) = (s.domain.lower.clone(), s.domain.upper.clone());
    let corner = DVector::from_fn(s.dimension, |i, _| lower[i].abs().max(upper[i].abs()));
    let r_max = corner.norm() * (1.0 + 1e-9);
    let g0_graph = SampleGraph::build(
        s.metric.as_ref(),
        lower.clone(),
        upper.clone(),
        settings.grid,
    )?;
    let pairs = random_pairs(g0_graph.node_count(), settings.pairs, settings.seed);
    let alpha = a_nu(
        s.metric.as_ref(),
        &s.grid(settings.grid.min(GROUP_GRID_CAP)),
    )?;
    let chord: Vec<DVector<f64>> = (0..=32)
        .map(|k| {
            let t = k as f64 / 32.0;
            DVector::from_fn(s.dimension, |i, _| {
                let a = lower[i] + 0.1 * (upper[i] - lower[i]);
                let b = upper[i] - 0.1 * (upper[i] - lower[i]);
                a + t * (b - a) * if i == 0 { 1.0 } else { 0.5 }
            })
        })
        .collect();
    let mut series = Vec::new();
    let mut length_ok = true;
    let mut table = Vec::new();
    for (e, r) in settings.epsilons.iter().zip(&rules) {
        let field = evaluation_field(s, r, r_max)?;
        let graph =
            SampleGraph::build(field.as_ref(), lower.clone(), upper.clone(), settings.grid)?;
        let dil = dilation_estimate(&g0_graph, &graph, &pairs)?;
        report.bounded(
            Some(*e),
            "dilation_deviation",
            dil.max_deviation,
            DILATION_TOLERANCE,
        );
        series.push(dil.max_deviation);
        table.push(vec![*e, dil.max_deviation]);
        let (dl, integral, coarse) =
            length_deviation_bound(&chord, s.metric.as_ref(), field.as_ref(), alpha)?;
        let ok = dl <= integral * (1.0 + 1e-9) + 1e-14;
        length_ok &= ok;
        report.row(Some(*e), "chord_length_deviation", dl, integral, ok);
        report.row(
            Some(*e),
            "chord_length_coarse_bound",
            coarse,
            f64::INFINITY,
            true,
        );
    }
    let last = *series.last().expect("non-empty sweep");
    let up = increases(&series, SERIES_FLOOR);
    report.check("dilation_decreasing", up as f64, 0.0, up == 0);
    report.check(
        "dilation_final",
        last,
        DILATION_TOLERANCE,
        last <= DILATION_TOLERANCE,
    );
    report.check(
        "length_deviation_bound",
        f64::from(u8::from(!length_ok)),
        0.0,
        length_ok,
    );
    report.tables.push(Table {
        file_name: "dilation.csv".into(),
        header: vec!["epsilon".into(), "max_dilation_deviation".into()],
        rows: table,
    });
    Ok(())
}

fn select_epsilon(s: &Scenario, settings: &Settings, report: &mut Report) -> Result<()> {
    let grid = s.grid(settings.grid);
    let alpha = a_nu(s.metric.as_ref(), &grid)?;
    report.row(None, "a_nu", alpha, 0.0, alpha > 0.0);
    let search = EpsilonSearch {
        epsilons: settings.epsilons.clone(),
        quadrature_level: settings.quadrature_level,
        grid,
        mode: fd_mode(settings),
    };
    let mut ks = settings.k_values.clone();
    ks.sort_unstable();
    ks.dedup();
    let (mut missing, mut order_violations) = (0usize, 0usize);
    for (i, chart) in s.atlas.iter().enumerate() {
        let mut ladder = DeviationLadder::new(s.metric.clone(), chart, &s.group, &search);
        let mut previous = f64::INFINITY;
        for &k in &ks {
            match ladder.select(k, alpha) {
                Ok(sel) => {
                    report.row(
                        Some(sel.epsilon),
                        format!("selected[chart={i}][k={k}]"),
                        sel.deviation,
                        sel.bound,
                        true,
                    );
                    if sel.epsilon > previous {
                        order_violations += 1;
                    }
                    previous = sel.epsilon;
                }
                Err(Error::EpsilonNotFound {
                    bound, achieved, ..
                }) => {
                    missing += 1;
                    report.row(
                        None,
                        format!("selected[chart={i}][k={k}]"),
                        achieved,
                        bound,
                        false,
                    );
                }
                Err(e) => return Err(e),
            }
        }
        for j in 0..search.epsilons.len() {
            if let Some(d) = ladder.cached(j) {
                report.row(
                    Some(search.epsilons[j]),
                    format!("h_g_deviation[chart={i}]"),
                    d,
                    alpha,
                    d <= alpha,
                );
            }
        }
    }
    report.check("epsilon_found", missing as f64, 0.0, missing == 0);
    report.check(
        "epsilon_non_increasing_in_k",
        order_violations as f64,
        0.0,
        order_violations == 0,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn decreasing_with_floor() {
        assert!(is_decreasing(&[1.0, 0.5, 0.25], 0.0));
        assert!(!is_decreasing(&[1.0, 1.0], 0.0));
        assert!(is_decreasing(&[1e-15, 2e-15], 1e-12));
    }

    #[test]
    fn csv_quotes_commas() {
        let mut r = Report::new("s", ExperimentKind::SmoothMetric);
        r.bounded(Some(0.1), "a,b", 1.0, 2.0);
        assert!(r.results_csv().contains("\"a,b\""));
    }

    #[test]
    fn translation_region_excludes_bridge() {
        let atlas = vec![AtlasChart::unit(2)];
        assert!(in_translation_region(
            &atlas,
            &DVector::from_vec(vec![0.1, 0.0]),
            0.05
        ));
        assert!(!in_translation_region(
            &atlas,
            &DVector::from_vec(vec![0.5, 0.0]),
            0.05
        ));
        assert!(in_translation_region(
            &atlas,
            &DVector::from_vec(vec![0.95, 0.0]),
            0.05
        ));
    }
}
