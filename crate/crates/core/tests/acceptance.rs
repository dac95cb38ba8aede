//! Acceptance suite: one PASS/FAIL line per criterion at its pinned tolerance.
//!
//! Runs without the libtest harness so the lines always print; exits 1 if any criterion fails.

use eqmollify::ball::ShiftMap;
use eqmollify::config::{ExperimentConfig, ExperimentKind};
use eqmollify::currents::{smooth_z, smooth_z_tilde, TestForm};
use eqmollify::curvature::{curvature_bounds, BoundsSampling};
use eqmollify::experiment::{run_experiment, translated, Report};
use eqmollify::kernel::MollifierKernel;
use eqmollify::metric::{
    w2_inf_distance, ChartSmoothedMetric, ConformalMetric, ConstantMetric, DerivativeMode,
    MetricField, MollifiedMetric, SampleGrid, SharedField,
};
use eqmollify::scenario::{scenario, square_loop, RADIAL_C11_BOUNDS};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Experiment runs kept for the determinism rerun.
#[derive(Default)]
struct Runs {
    done: Vec<(ExperimentKind, ExperimentConfig, Report)>,
}

impl Runs {
    fn run(&mut self, kind: ExperimentKind, config: ExperimentConfig) -> Report {
        let report = run_experiment(kind, &config)
            .unwrap_or_else(|e| panic!("{} {}: {e}", kind.name(), config.scenario));
        self.done.push((kind, config, report.clone()));
        report
    }

    /// An earlier report with the same resolved settings, or a fresh run.
    fn reuse_or_run(&mut self, kind: ExperimentKind, config: ExperimentConfig) -> Report {
        let wanted = config.resolve(kind).unwrap();
        let earlier = self
            .done
            .iter()
            .find(|(k, c, _)| *k == kind && c.resolve(kind).unwrap() == wanted);
        match earlier {
            Some((_, _, report)) => report.clone(),
            None => self.run(kind, config),
        }
    }
}

fn check(report: &Report, name: &str) -> (bool, f64, f64) {
    let c = report
        .check_named(name)
        .unwrap_or_else(|| panic!("{}: no check {name}", report.scenario));
    (c.pass, c.value, c.tolerance)
}

fn v(a: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(a)
}

fn decreasing(series: &[f64]) -> bool {
    series.windows(2).all(|w| w[1] < w[0])
}

fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!(),
    }
}

fn kernel_mass() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for eps in [0.05, 0.1, 0.2] {
            let k = MollifierKernel::new(n, eps, 4).unwrap();
            let rule_mass: f64 = k.rule().weights.iter().sum();
            // Independent radial trapezoid sum; the integrand is flat at both ends.
            let m = 4000;
            let h = eps / m as f64;
            let at = |r: f64| k.f_eps_radius(r) * r.powi(n as i32 - 1);
            let radial = (0.5 * at(0.0) + (1..m).map(|i| at(i as f64 * h)).sum::<f64>())
                * h
                * sphere_area(n);
            worst = worst.max((rule_mass - 1.0).abs()).max((radial - 1.0).abs());
        }
    }
    Outcome::new(
        worst <= 1e-6,
        format!("max |mass - 1| = {worst:.3e} (tol 1e-6)"),
    )
}

fn weak_convergence(runs: &mut Runs) -> Outcome {
    let config = ExperimentConfig {
        epsilons: Some(vec![0.2, 0.1, 0.05, 0.025]),
        ..ExperimentConfig::for_scenario("orbit_currents")
    };
    let r = runs.run(ExperimentKind::MollifyCurrent, config);
    let mut pass = true;
    let mut parts = Vec::new();
    for name in [
        "z_weak_convergence",
        "z_series_decreasing",
        "z_tilde_weak_convergence",
        "z_tilde_series_decreasing",
    ] {
        let (ok, value, tol) = check(&r, name);
        pass &= ok;
        parts.push(format!("{name}={value:.3e} (tol {tol:.0e})"));
    }
    Outcome::new(pass, parts.join(", "))
}

fn support_exactness(runs: &Runs) -> Outcome {
    let (_, _, r) = runs
        .done
        .iter()
        .find(|(k, _, _)| *k == ExperimentKind::MollifyCurrent)
        .expect("criterion 2 ran");
    let (mut pass, reported, _) = check(r, "support_exact");
    // Direct probe: a form supported far from the square loop, and the loop moved outside the ball.
    let t = square_loop();
    let mut violations = 0usize;
    let s = scenario("orbit_currents", 64).unwrap();
    let forms = s.forms(1).unwrap();
    let far = TestForm::new(
        2,
        1,
        v(&[1.5, 1.5]),
        0.1,
        0.3,
        vec![(vec![0], Arc::new(|_: &DVector<f64>| 1.0))],
    )
    .unwrap();
    let outside = translated(&t, &v(&[0.0, 1.8])).unwrap();
    assert!(outside.min_norm() > 1.0);
    for eps in [0.2, 0.1, 0.05] {
        let rule = MollifierKernel::new(2, eps, 4).unwrap().rule();
        assert!(t.distance_to(&v(&[1.5, 1.5])) - 0.3 > eps);
        violations += usize::from(smooth_z(&t, &far, &rule).unwrap() != 0.0);
        for w in &forms {
            violations += usize::from(
                smooth_z_tilde(&outside, w, &rule).unwrap() != outside.evaluate(w).unwrap(),
            );
        }
    }
    pass &= violations == 0;
    Outcome::new(
        pass,
        format!("violations: experiment {reported}, direct {violations} (tol 0, bit-exact)"),
    )
}

fn group_equivariance(runs: &mut Runs) -> Outcome {
    let r = runs.run(
        ExperimentKind::InvarianceCheck,
        ExperimentConfig::for_scenario("euclid_z4"),
    );
    let (pass, value, tol) = check(&r, "z_g_invariance");
    Outcome::new(pass, format!("Z^G residual {value:.3e} (tol {tol:.0e})"))
}

fn shift_quality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut exact = true;
    for _ in 0..200 {
        let th = rng.gen_range(0.0..2.0 * PI);
        let r = rng.gen_range(1.0..3.0);
        let x = v(&[r * th.cos(), r * th.sin()]);
        let s = ShiftMap::new(v(&[rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)]));
        exact &= s.apply(&x).unwrap() == x;
    }
    let grid = SampleGrid::ball(2, 0.999, 41).points();
    let dir = v(&[0.6, -0.8]);
    let sup: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&t| {
            let s = ShiftMap::new(&dir * t);
            grid.iter()
                .map(|x| (s.apply(x).unwrap() - x).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let series_ok = decreasing(&sup) && sup[3] < 1e-3;
    let h = 1e-6;
    let mut jac_err = 0.0f64;
    for _ in 0..200 {
        let y = v(&[rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)]);
        let x = v(&[rng.gen_range(-0.95..0.95), rng.gen_range(-0.95..0.95)]);
        let s = ShiftMap::new(y);
        let j = s.jacobian(&x).unwrap();
        let fd = DMatrix::from_fn(2, 2, |i, k| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            (s.apply(&xp).unwrap()[i] - s.apply(&xm).unwrap()[i]) / (2.0 * h)
        });
        jac_err = jac_err.max((j - fd).amax());
    }
    Outcome::new(
        exact && series_ok && jac_err <= 1e-5,
        format!(
            "identity outside ball {exact}; sup |s_y - id| {:?} -> {:.3e} (tol 1e-3); Jacobian vs FD {jac_err:.3e} (tol 1e-5)",
            sup.iter().map(|d| format!("{d:.1e}")).collect::<Vec<_>>(),
            sup[3]
        ),
    )
}

fn locality_and_invariance(runs: &mut Runs) -> Outcome {
    let mut pass = true;
    let mut locality = 0usize;
    for name in [
        "euclid_z4",
        "round_sphere_chart",
        "radial_c11",
        "strip_two_charts",
    ] {
        let s = scenario(name, 64).unwrap();
        let rule = MollifierKernel::new(2, 0.05, 2).unwrap().rule();
        for chart in &s.atlas {
            let hei =
                ChartSmoothedMetric::new(s.metric.clone(), chart.clone(), rule.clone()).unwrap();
            for k in 0..64 {
                let th = 2.0 * PI * k as f64 / 64.0;
                let rho = chart.radius * (1.0 + 0.01 * (k % 8) as f64);
                let x = v(&[
                    chart.center[0] + rho * th.cos(),
                    chart.center[1] + rho * th.sin(),
                ]);
                locality += usize::from(hei.value(&x).unwrap() != s.metric.value(&x).unwrap());
            }
        }
    }
    pass &= locality == 0;
    let mut parts = vec![format!("H_e_i locality violations {locality} (tol 0)")];
    for (name, epsilons) in [
        ("euclid_z4", None),
        ("round_sphere_chart", None),
        ("radial_c11", Some(vec![0.05])),
    ] {
        let config = ExperimentConfig {
            epsilons,
            group_nodes: Some(64),
            ..ExperimentConfig::for_scenario(name)
        };
        let r = runs.reuse_or_run(ExperimentKind::InvarianceCheck, config);
        let (ok, value, tol) = check(&r, "h_g_invariance");
        pass &= ok;
        parts.push(format!("{name} H^G residual {value:.3e} (tol {tol:.0e})"));
    }
    Outcome::new(pass, parts.join("; "))
}

fn seminorm_approximation() -> Outcome {
    let s = scenario("round_sphere_chart", 8).unwrap();
    let grid = s.grid(25);
    let mut series = Vec::new();
    for i in 0..9 {
        let eps = 0.05 * 0.25f64.powi(i);
        let rule = MollifierKernel::new(2, eps, 4).unwrap().rule();
        let ht: SharedField = Arc::new(MollifiedMetric::new(s.metric.clone(), rule).unwrap());
        series
            .push(w2_inf_distance(ht, s.metric.clone(), &grid, DerivativeMode::default()).unwrap());
    }
    let best = series.iter().cloned().fold(f64::INFINITY, f64::min);
    Outcome::new(
        decreasing(&series) && best < 0.01,
        format!(
            "|H~ g - g|_W2inf series decreasing {}, min {best:.3e} (delta 1e-2)",
            decreasing(&series)
        ),
    )
}

fn curvature_preservation(runs: &mut Runs, sphere_eps: f64) -> Outcome {
    let sphere = runs.run(
        ExperimentKind::CurvatureReport,
        ExperimentConfig {
            epsilons: Some(vec![sphere_eps]),
            ..ExperimentConfig::for_scenario("round_sphere_chart")
        },
    );
    let (a, gap_s, tol) = check(&sphere, "bounds_preserved_at_final_epsilon");
    let radial = runs.run(
        ExperimentKind::CurvatureReport,
        ExperimentConfig::for_scenario("radial_c11"),
    );
    let (b, gap_r, _) = check(&radial, "bounds_preserved_at_final_epsilon");
    let (c, _, _) = check(&radial, "base_bounds_match_declared");
    Outcome::new(
        a && b && c,
        format!(
            "sphere gap to (1,1) at eps {sphere_eps:.3e}: {gap_s:.3e}; radial_c11 gap to fixture ({:.4}, {:.4}): {gap_r:.3e} (tol {tol})",
            RADIAL_C11_BOUNDS.0, RADIAL_C11_BOUNDS.1
        ),
    )
}

fn constant_curvature() -> Outcome {
    let points = SampleGrid::ball(2, 0.9, 11).points();
    let analytic = BoundsSampling {
        mode: DerivativeMode::Analytic,
        seed: SEED,
        ..Default::default()
    };
    let cases: [(Box<dyn MetricField>, f64, f64, &str); 3] = [
        (
            Box::new(ConstantMetric::euclidean(2)),
            0.0,
            1e-10,
            "euclidean",
        ),
        (Box::new(ConformalMetric::sphere(2)), 1.0, 1e-6, "sphere"),
        (
            Box::new(ConformalMetric::poincare(2)),
            -1.0,
            1e-6,
            "poincare",
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (g, k, tol, label) in cases {
        let b = curvature_bounds(g.as_ref(), &points, analytic).unwrap();
        let dev = (b.k_lower - k).abs().max((b.k_upper - k).abs());
        pass &= dev <= tol;
        parts.push(format!("{label} |K - {k}| {dev:.3e} (tol {tol:.0e})"));
    }
    Outcome::new(pass, parts.join("; "))
}

fn lipschitz_proxy(runs: &mut Runs) -> Outcome {
    let config = ExperimentConfig {
        pairs: Some(64),
        seed: Some(SEED),
        ..ExperimentConfig::for_scenario("radial_c11")
    };
    let r = runs.run(ExperimentKind::LipschitzSweep, config);
    let (a, up, _) = check(&r, "dilation_decreasing");
    let (b, last, tol) = check(&r, "dilation_final");
    Outcome::new(
        a && b,
        format!("increases {up}, final dilation deviation {last:.3e} (tol {tol})"),
    )
}

fn epsilon_selection(runs: &mut Runs) -> (Outcome, f64) {
    let config = ExperimentConfig {
        k_values: Some(vec![1, 2, 4]),
        ..ExperimentConfig::for_scenario("round_sphere_chart")
    };
    let r = runs.run(ExperimentKind::SelectEpsilon, config);
    let (a, missing, _) = check(&r, "epsilon_found");
    let (b, order, _) = check(&r, "epsilon_non_increasing_in_k");
    let picks: Vec<(String, f64)> = r
        .rows
        .iter()
        .filter(|row| row.quantity.starts_with("selected"))
        .map(|row| (row.quantity.clone(), row.epsilon.unwrap_or(f64::NAN)))
        .collect();
    let smallest = picks.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let listed: Vec<String> = picks.iter().map(|(q, e)| format!("{q}: {e:.4e}")).collect();
    (
        Outcome::new(
            a && b,
            format!(
                "missing {missing}, order violations {order}; {}",
                listed.join(", ")
            ),
        ),
        smallest,
    )
}

fn determinism(runs: &Runs) -> Outcome {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut files = 0usize;
    for (i, (kind, config, report)) in runs.done.iter().enumerate() {
        let again = run_experiment(*kind, config).unwrap();
        let (a, b) = (
            first.path().join(i.to_string()),
            second.path().join(i.to_string()),
        );
        report.write(&a).unwrap();
        again.write(&b).unwrap();
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if !name.to_string_lossy().ends_with(".csv") {
                continue;
            }
            files += 1;
            if std::fs::read(a.join(&name)).unwrap() != std::fs::read(b.join(&name)).unwrap() {
                mismatches.push(format!(
                    "{}/{}/{}",
                    config.scenario,
                    kind.name(),
                    name.to_string_lossy()
                ));
            }
        }
    }
    Outcome::new(
        mismatches.is_empty() && files > 0,
        format!("{files} CSV files compared, mismatches {mismatches:?}"),
    )
}

fn report_line(
    id: usize,
    title: &str,
    out: &Outcome,
    elapsed: Duration,
    budget: Option<u64>,
) -> bool {
    let secs = elapsed.as_secs_f64();
    let in_budget = budget.map_or(true, |b| secs < b as f64);
    let pass = out.pass && in_budget;
    let budget = budget.map_or(String::new(), |b| format!(", budget {b} s"));
    println!(
        "{} {id:>2} {title}: {} [{secs:.1} s{budget}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    pass
}

fn main() {
    let start = Instant::now();
    let mut runs = Runs::default();
    let mut all = true;
    let timed = |f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        (out, t.elapsed())
    };

    let (o, t) = timed(&mut kernel_mass);
    all &= report_line(1, "kernel mass", &o, t, Some(1));
    let (o, t) = timed(&mut || weak_convergence(&mut runs));
    all &= report_line(2, "weak convergence of Z and Z~", &o, t, Some(30));
    let (o, t) = timed(&mut || support_exactness(&runs));
    all &= report_line(3, "support exactness", &o, t, None);
    let (o, t) = timed(&mut || group_equivariance(&mut runs));
    all &= report_line(4, "equivariance of Z^G", &o, t, None);
    let (o, t) = timed(&mut shift_quality);
    all &= report_line(5, "shift-map quality", &o, t, None);
    let (o, t) = timed(&mut || locality_and_invariance(&mut runs));
    all &= report_line(6, "metric smoothing locality and invariance", &o, t, None);
    let (o, t) = timed(&mut seminorm_approximation);
    all &= report_line(7, "seminorm approximation", &o, t, Some(120));

    let t11 = Instant::now();
    let (o11, selected) = epsilon_selection(&mut runs);
    let e11 = t11.elapsed();
    let (o, t) = timed(&mut || curvature_preservation(&mut runs, selected));
    all &= report_line(8, "curvature-bound preservation", &o, t, Some(180));
    let (o, t) = timed(&mut constant_curvature);
    all &= report_line(9, "constant-curvature sanity", &o, t, None);
    let (o, t) = timed(&mut || lipschitz_proxy(&mut runs));
    all &= report_line(10, "Lipschitz convergence proxy", &o, t, Some(120));
    all &= report_line(11, "select_epsilon_for_k", &o11, e11, None);

    let first_pass = start.elapsed();
    let (o, t) = timed(&mut || determinism(&runs));
    let total = start.elapsed();
    let o = Outcome::new(
        o.pass && total.as_secs() < 600,
        format!(
            "{}; suite {:.1} s, with rerun {:.1} s (budget 600 s)",
            o.detail,
            first_pass.as_secs_f64(),
            total.as_secs_f64()
        ),
    );
    all &= report_line(12, "determinism", &o, t, None);

    println!(
        "{}",
        if all {
            "acceptance: all criteria pass"
        } else {
            "acceptance: FAILURES"
        }
    );
    if !all {
        std::process::exit(1);
    }
}
