use eqmollify::ball::ShiftMap;
use eqmollify::chart::AtlasChart;
use eqmollify::curvature::{christoffel, curvature_bounds, sectional_curvature_of, BoundsSampling};
use eqmollify::diffeo::Affine;
use eqmollify::distance::{curve_length, graph_distance, SampleGraph};
use eqmollify::group::GroupAction;
use eqmollify::kernel::MollifierKernel;
use eqmollify::metric::{
    a_nu, compose_hg, pullback_metric, sobolev_seminorm, ConformalMetric, ConstantMetric,
    DerivativeMode, Exponent, MetricField, MollifiedMetric, SampleGrid, SeminormOrder, SharedField,
};
use eqmollify::scenario::scenario;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::f64::consts::TAU;
use std::sync::Arc;

fn v(a: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(a)
}

/// `int f_eps(y) (s_y^* g)(x) dy` by midpoint in the radius and trapezoid in the angle.
fn polar_sum(
    g: &dyn MetricField,
    x: &DVector<f64>,
    eps: f64,
    nr: usize,
    na: usize,
) -> DMatrix<f64> {
    let kernel = MollifierKernel::new(2, eps, 1).unwrap();
    let mut acc = DMatrix::zeros(2, 2);
    let dr = eps / nr as f64;
    for i in 0..nr {
        let rho = (i as f64 + 0.5) * dr;
        let w = kernel.f_eps_radius(rho) * rho * dr * TAU / na as f64;
        for k in 0..na {
            let th = TAU * k as f64 / na as f64;
            let s = ShiftMap::new(v(&[rho * th.cos(), rho * th.sin()]));
            let (y, j) = s.apply_with_jacobian(x).unwrap();
            acc += j.transpose() * g.value(&y).unwrap() * j * w;
        }
    }
    acc
}

/// Richardson-extrapolated polar sums at radial counts `nr` and `2 nr`.
fn polar_oracle(g: &dyn MetricField, x: &DVector<f64>, eps: f64, nr: usize) -> DMatrix<f64> {
    (polar_sum(g, x, eps, 2 * nr, 256) * 4.0 - polar_sum(g, x, eps, nr, 256)) / 3.0
}

#[test]
fn mollified_c11_metric_matches_polar_oracle() {
    let g: SharedField = Arc::new(ConformalMetric::radial_c11(2));
    // Frozen oracle values (column-major); the second kernel ball straddles the kink.
    let cases = [
        (
            v(&[0.2, 0.1]),
            [0.9746733609953716, 0.0, 0.0, 0.9746733609953716],
        ),
        (
            v(&[0.3, 0.3]),
            [
                0.9868507721086234,
                0.07664031691090727,
                0.07664031691090727,
                0.9868507721086228,
            ],
        ),
    ];
    for (x, frozen) in cases {
        let frozen = DMatrix::from_column_slice(2, 2, &frozen);
        let oracle = polar_oracle(g.as_ref(), &x, 0.05, 200);
        assert!((&oracle - &frozen).amax() < 1e-10, "oracle {oracle}");
        let m = MollifiedMetric::new(g.clone(), MollifierKernel::new(2, 0.05, 5).unwrap().rule())
            .unwrap();
        assert!((m.value(&x).unwrap() - &frozen).amax() < 1e-9, "{x}");
    }
}

#[test]
fn torus_quadrature_self_convergence() {
    let s = scenario("radial_c11", 64).unwrap();
    let rule = MollifierKernel::new(2, 0.05, 3).unwrap().rule();
    let coarse = compose_hg(s.metric.clone(), &s.atlas, &[rule.clone()], &s.group, &[]).unwrap();
    let fine_group = GroupAction::circle(2, 128).unwrap();
    let fine = compose_hg(s.metric.clone(), &s.atlas, &[rule], &fine_group, &[]).unwrap();
    for x in [
        v(&[0.1, 0.05]),
        v(&[0.3, -0.2]),
        v(&[0.0, 0.44]),
        v(&[-0.5, 0.2]),
        v(&[0.6, 0.5]),
    ] {
        let d = (coarse.value(&x).unwrap() - fine.value(&x).unwrap()).amax();
        assert!(d < 1e-8, "{x}: {d}");
    }
}

#[test]
fn strip_composition_fixes_constant_metric_in_translation_zone() {
    let s = scenario("strip_two_charts", 1).unwrap();
    let rule = MollifierKernel::new(2, 0.02, 2).unwrap().rule();
    let hg = compose_hg(s.metric.clone(), &s.atlas, &[rule], &s.group, &[]).unwrap();
    let g0 = s.metric.value(&v(&[0.0, 0.0])).unwrap();
    // Chart radii at these points avoid the bridge zone of both charts.
    for x in [
        v(&[0.6, 0.0]),
        v(&[0.75, 0.2]),
        v(&[0.55, -0.3]),
        v(&[-0.6, -0.1]),
        v(&[-0.75, 0.2]),
    ] {
        assert!((hg.value(&x).unwrap() - &g0).amax() <= 1e-12, "{x}");
    }
}

#[test]
fn a_nu_of_sphere_is_attained_on_the_boundary() {
    let g = ConformalMetric::sphere(2);
    let grid = SampleGrid::ball(2, 0.95, 13);
    let r_max = grid.points().iter().map(|p| p.norm()).fold(0.0, f64::max);
    let expected = 4.0 / (1.0 + r_max * r_max).powi(2);
    assert!((a_nu(&g, &grid).unwrap() - expected).abs() < 1e-12);
    assert!((expected - 1.1051231089875864).abs() < 1e-12);
    assert_eq!(
        a_nu(&ConstantMetric::scaled_identity(2, 4.0), &grid).unwrap(),
        4.0
    );
}

#[test]
fn c11_seminorm_is_stable_under_refinement() {
    let g = ConformalMetric::radial_c11(2);
    let grid = SampleGrid::ball(2, 0.9, 21);
    let mode = DerivativeMode::default();
    let r = sobolev_seminorm(&g, Exponent::Infinity, SeminormOrder::W2, &grid, mode, true).unwrap();
    assert!(r.value.is_finite() && r.value > 0.0);
    assert_eq!(r.stable, Some(true), "{r:?}");
}

#[test]
fn conformal_christoffel_closed_form() {
    // g = e^{2 x_0} delta: Gamma^k_ij = delta_ik d_j f + delta_jk d_i f - delta_ij d_k f, f = x_0.
    let g = ConformalMetric::exponential(2, 0, 1.0);
    let gamma = christoffel(&g, &v(&[0.3, -0.7]), DerivativeMode::Analytic).unwrap();
    let df = [1.0, 0.0];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                let expected = d(i, k) * df[j] + d(j, k) * df[i] - d(i, j) * df[k];
                assert!((gamma[k][i][j] - expected).abs() < 1e-8, "{k}{i}{j}");
            }
        }
    }
}

#[test]
fn model_curvatures() {
    let pts: Vec<_> = SampleGrid::ball(2, 0.8, 9).points();
    let analytic = BoundsSampling {
        mode: DerivativeMode::Analytic,
        ..Default::default()
    };
    for (g, k) in [
        (Arc::new(ConformalMetric::sphere(2)) as SharedField, 1.0),
        (Arc::new(ConformalMetric::poincare(2)), -1.0),
        (Arc::new(ConstantMetric::euclidean(2)), 0.0),
    ] {
        let b = curvature_bounds(g.as_ref(), &pts, analytic).unwrap();
        let tol = if k == 0.0 { 1e-10 } else { 1e-6 };
        assert!(
            (b.k_lower - k).abs() < tol && (b.k_upper - k).abs() < tol,
            "{k}: {b:?}"
        );
    }
}

#[test]
fn c11_curvature_fixture_from_dense_scan() {
    // Scan the closed-form curvature at 10x the ray resolution used by the experiments.
    let g = ConformalMetric::radial_c11(2);
    let (lo, hi) = eqmollify::scenario::RADIAL_C11_BOUNDS;
    let (mut kmin, mut kmax) = (f64::INFINITY, f64::NEG_INFINITY);
    // Radii i / 1000 with the two samples on either side of the kink at 0.45 removed.
    for i in (0..=900).filter(|i: &i32| (i - 450).abs() > 2) {
        let r = i as f64 / 1000.0;
        let k = sectional_curvature_of(
            &g,
            &v(&[r, 0.0]),
            &v(&[1.0, 0.0]),
            &v(&[0.0, 1.0]),
            DerivativeMode::Analytic,
        )
        .unwrap();
        kmin = kmin.min(k);
        kmax = kmax.max(k);
    }
    assert!(
        (kmin - lo).abs() < 1e-9 && (kmax - hi).abs() < 1e-9,
        "[{kmin}, {kmax}]"
    );
}

#[test]
fn sphere_diameter_chord_length() {
    let g = ConformalMetric::sphere(2);
    let line: Vec<_> = (0..=64)
        .map(|i| v(&[-0.9 + 1.8 * i as f64 / 64.0, 0.0]))
        .collect();
    // 2 int_{-a}^{a} dt / (1 + t^2) = 4 atan(a), frozen from a 30-digit evaluation.
    let expected = 2.931_260_407_146_026_4;
    assert!((curve_length(&line, &g).unwrap() - expected).abs() < 1e-10);
}

#[test]
fn scaled_metric_segment_lengths() {
    let unit = curve_length(
        &[v(&[0.0, 0.0]), v(&[1.0, 0.0])],
        &ConstantMetric::euclidean(2),
    )
    .unwrap();
    assert!((unit - 1.0).abs() < 1e-10);
    let four = ConstantMetric::scaled_identity(2, 4.0);
    let l = curve_length(&[v(&[0.1, 0.2]), v(&[0.7, -0.3])], &four).unwrap();
    assert!((l - 2.0 * (0.36f64 + 0.25).sqrt()).abs() < 1e-10);
}

#[test]
fn radial_graph_distance_against_refined_run() {
    // Frozen from the same pair on a 401-point grid (10x the resolution below).
    const REFINED: f64 = 1.463_704_571_208_677;
    let g = ConformalMetric::radial_c11(2);
    let graph = SampleGraph::build(&g, vec![-0.8, -0.8], vec![0.8, 0.8], 41).unwrap();
    let d = graph_distance(&graph, &v(&[-0.6, -0.4]), &v(&[0.6, 0.4])).unwrap();
    assert!((d - REFINED).abs() < 1e-3 * REFINED, "{d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pullback_round_trip(a in 0.5f64..2.0, b in -0.5f64..0.5, c in 0.5f64..2.0, x0 in -0.3f64..0.3, x1 in -0.3f64..0.3) {
        let m = DMatrix::from_row_slice(2, 2, &[a, b, 0.0, c]);
        let inv = m.clone().try_inverse().unwrap();
        let g: SharedField = Arc::new(ConformalMetric::sphere(2));
        let there: SharedField = Arc::new(pullback_metric(g.clone(), Arc::new(Affine::linear(m))));
        let back = pullback_metric(there, Arc::new(Affine::linear(inv)));
        let x = v(&[x0, x1]);
        prop_assert!((back.value(&x).unwrap() - g.value(&x).unwrap()).amax() < 1e-8);
    }

    #[test]
    fn smoothing_is_local_and_spd(x0 in -1.5f64..1.5, x1 in -1.5f64..1.5, eps in 0.01f64..0.2) {
        let g: SharedField = Arc::new(ConformalMetric::sphere(2));
        let chart = AtlasChart::new(vec![0.2, 0.0], 0.9);
        let rule = MollifierKernel::new(2, eps, 3).unwrap().rule();
        let hg = compose_hg(g.clone(), std::slice::from_ref(&chart), &[rule], &GroupAction::trivial(2), &[]).unwrap();
        let x = v(&[x0, x1]);
        let value = hg.value(&x).unwrap();
        if chart.chart_radius(&x) >= 1.0 {
            prop_assert_eq!(value, g.value(&x).unwrap());
        } else {
            prop_assert!(value.symmetric_eigen().eigenvalues.min() > 0.0);
        }
    }
}
