use eqmollify::chart::AtlasChart;
use eqmollify::currents::smoothing::INVARIANCE_TOLERANCE;
use eqmollify::currents::{
    equivariant_z, invariance_residual, smooth_z, smooth_z_tilde, Current, EquivariantSmoother,
    TestForm,
};
use eqmollify::experiment::translated;
use eqmollify::group::GroupAction;
use eqmollify::kernel::MollifierKernel;
use eqmollify::scenario::{dirac_orbit, scenario, square_loop, vector_orbit};
use nalgebra::DVector;
use proptest::prelude::*;

// int |y|^2 f_1(y) dy in the plane, frozen from a 30-digit quadrature.
const SECOND_MOMENT_2D: f64 = 0.26131120342055865;

fn v(a: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(a)
}

fn sine_form() -> TestForm {
    let s = scenario("orbit_currents", 64).unwrap();
    s.forms(1).unwrap().pop().unwrap()
}

#[test]
fn equivariant_smoothing_keeps_orbit_mass() {
    let t = dirac_orbit();
    let one = TestForm::function(2, 2.0, 3.0, |_| 1.0).unwrap();
    let group = GroupAction::cyclic(2, 4).unwrap();
    for eps in [0.2, 0.1, 0.05] {
        let rule = MollifierKernel::new(2, eps, 4).unwrap().rule();
        let m = equivariant_z(&t, &one, &rule, &AtlasChart::unit(2), &group).unwrap();
        assert!((m - 4.0).abs() < 1e-6, "{eps}: {m}");
    }
}

#[test]
fn dirac_at_origin_sees_second_moment() {
    let t = Current::dirac(v(&[0.0, 0.0]), 1.0);
    let r2 = TestForm::function(2, 1.0, 2.0, |x| x.norm_squared()).unwrap();
    for eps in [0.2, 0.1, 0.05] {
        let rule = MollifierKernel::new(2, eps, 5).unwrap().rule();
        let z = smooth_z(&t, &r2, &rule).unwrap();
        assert!(
            (z - SECOND_MOMENT_2D * eps * eps).abs() < 1e-8 * eps * eps,
            "{eps}: {z}"
        );
    }
}

#[test]
fn z_tilde_converges_at_a_rate() {
    let t = Current::segment(v(&[-0.1, 0.05]), v(&[0.2, -0.1])).unwrap();
    let w = sine_form();
    let exact = t.evaluate(&w).unwrap();
    let err = |eps: f64| {
        let rule = MollifierKernel::new(2, eps, 4).unwrap().rule();
        (smooth_z_tilde(&t, &w, &rule).unwrap() - exact).abs()
    };
    for eps in [0.1, 0.05] {
        let ratio = err(eps) / err(eps / 2.0);
        assert!(ratio >= 1.3, "eps {eps}: ratio {ratio}");
    }
}

#[test]
fn reflection_detects_a_non_invariant_point() {
    let t = Current::dirac(v(&[0.3, 0.1]), 1.0);
    let w = TestForm::function(2, 0.5, 1.0, |x| x[0]).unwrap();
    let flip = GroupAction::reflection(2, 0).unwrap();
    assert!(invariance_residual(&t, &flip, &[w.clone()]).unwrap() > 0.1);
    assert_eq!(
        invariance_residual(&t, &GroupAction::trivial(2), &[w]).unwrap(),
        0.0
    );
}

#[test]
fn trivial_group_is_the_localized_operator() {
    let t = square_loop();
    let w = sine_form();
    let rule = MollifierKernel::new(2, 0.1, 4).unwrap().rule();
    let sm = EquivariantSmoother::new(
        &t,
        rule,
        AtlasChart::unit(2),
        GroupAction::trivial(2),
        &[],
        INVARIANCE_TOLERANCE,
    )
    .unwrap();
    assert_eq!(sm.evaluate(&w).unwrap(), sm.localized(&w).unwrap());
}

#[test]
fn orbit_bank_pairings_by_direct_sum() {
    // Four unit tangent vectors R^k e_2 at R^k (0.2, 0): against x dy - y dx each contributes 0.2.
    let rot = TestForm::new(
        2,
        1,
        DVector::zeros(2),
        2.0,
        3.0,
        vec![
            (vec![1], std::sync::Arc::new(|x: &DVector<f64>| x[0])),
            (vec![0], std::sync::Arc::new(|x: &DVector<f64>| -x[1])),
        ],
    )
    .unwrap();
    assert!((vector_orbit().evaluate(&rot).unwrap() - 0.8).abs() < 1e-14);
    // The loop encloses area 0.36, so x dy - y dx integrates to 0.72.
    assert!((square_loop().evaluate(&rot).unwrap() - 0.72).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smoothing_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, eps in 0.02f64..0.2, k in 0usize..12) {
        let s = scenario("orbit_currents", 64).unwrap();
        let w = &s.forms(1).unwrap()[k];
        let (t1, t2) = (square_loop(), vector_orbit());
        let sum = t1.scaled(a).add(&t2.scaled(b)).unwrap();
        let rule = MollifierKernel::new(2, eps, 3).unwrap().rule();
        let lhs = smooth_z(&sum, w, &rule).unwrap();
        let rhs = a * smooth_z(&t1, w, &rule).unwrap() + b * smooth_z(&t2, w, &rule).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
        let lhs = smooth_z_tilde(&sum, w, &rule).unwrap();
        let rhs = a * smooth_z_tilde(&t1, w, &rule).unwrap() + b * smooth_z_tilde(&t2, w, &rule).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn far_forms_see_nothing(cx in 0.9f64..2.0, th in 0.0f64..6.3, eps in 0.02f64..0.2) {
        let t = square_loop();
        let center = v(&[cx * th.cos(), cx * th.sin()]);
        let radius = 0.2;
        prop_assume!(t.distance_to(&center) - radius > eps);
        let w = TestForm::new(2, 1, center, 0.1, radius, vec![(vec![0], std::sync::Arc::new(|_: &DVector<f64>| 1.0))]).unwrap();
        let rule = MollifierKernel::new(2, eps, 3).unwrap().rule();
        prop_assert_eq!(smooth_z(&t, &w, &rule).unwrap(), 0.0);
        prop_assert_eq!(t.evaluate(&w).unwrap(), 0.0);
    }

    #[test]
    fn z_tilde_fixes_currents_outside_the_ball(dx in 1.4f64..3.0, th in 0.0f64..6.3, k in 0usize..12) {
        let s = scenario("orbit_currents", 64).unwrap();
        let t = translated(&square_loop(), &v(&[dx * th.cos(), dx * th.sin()])).unwrap();
        prop_assume!(t.min_norm() > 1.0);
        let w = &s.forms(1).unwrap()[k];
        let rule = MollifierKernel::new(2, 0.1, 3).unwrap().rule();
        prop_assert_eq!(smooth_z_tilde(&t, w, &rule).unwrap(), t.evaluate(w).unwrap());
    }

    #[test]
    fn averaged_operator_is_invariant(eps in 0.02f64..0.2, k in 0usize..12) {
        let s = scenario("euclid_z4", 64).unwrap();
        let forms = s.forms(0).unwrap();
        let rule = MollifierKernel::new(2, eps, 3).unwrap().rule();
        let sm = EquivariantSmoother::new(&dirac_orbit(), rule, AtlasChart::unit(2), s.group.clone(), &forms, INVARIANCE_TOLERANCE).unwrap();
        let base = sm.evaluate(&forms[k]).unwrap();
        for g in s.group.probe_elements(8) {
            prop_assert!((sm.evaluate(&forms[k].pullback_linear(&g)).unwrap() - base).abs() <= 1e-10);
        }
    }
}
