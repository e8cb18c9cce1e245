use bwkit_core::random::random_pd;
use bwkit_core::{
    bw_distance_squared_psd, project_half_step, set_distance, BwError, ConvexSetSpec, SetDistanceOptions,
    SolverSettings, SymmetricMatrix,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn assert_monotone(history: &[f64]) {
    for w in history.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "history rises: {history:?}");
    }
}

#[test]
fn anchor_inside_target_projects_to_itself() {
    let (x, v) = project_half_step(
        &SymmetricMatrix::identity(5),
        &ConvexSetSpec::trace_equals(5, 5.0),
        &settings(),
    )
    .unwrap();
    assert!(x.max_abs_diff(&SymmetricMatrix::identity(5)) < 1e-5);
    assert!(v.abs() < 1e-7);
}

#[test]
fn trace_projection_is_proportional() {
    let a = random_pd(4, 30.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let a = a.scaled(2.0 / a.trace()).unwrap();
    let (x, v) = project_half_step(&a, &ConvexSetSpec::trace_equals(4, 1.0), &settings()).unwrap();
    assert!(x.max_abs_diff(&a.scaled(0.5).unwrap()) < 1e-4);
    // rho^2(A, A/2) = (1 - 1/sqrt 2)^2 Tr A
    let want = (1.0 - 0.5f64.sqrt()).powi(2) * 2.0;
    assert!((v - want).abs() < 1e-6);
    assert!((v - bw_distance_squared_psd(&a, &x).unwrap().distance_squared).abs() < 1e-4);
}

#[test]
fn near_rank_one_anchor() {
    let anchor = SymmetricMatrix::from_diagonal(&[1.0, 1e-4]).add(&SymmetricMatrix::identity(2).scaled(1e-9));
    let (x, _) = project_half_step(&anchor, &ConvexSetSpec::trace_equals(2, 1.0), &settings()).unwrap();
    let want = anchor.scaled(1.0 / anchor.trace());
    assert!(x.max_abs_diff(&want) < 1e-5, "{x:?}");
}

#[test]
fn trace_sets_give_the_trace_bound() {
    let r = set_distance(
        &ConvexSetSpec::trace_equals(5, 1.0),
        &ConvexSetSpec::trace_equals(5, 2.0),
        None,
        &SetDistanceOptions::default(),
        &settings(),
    )
    .unwrap();
    assert!(r.converged);
    assert!((r.distance_squared - (2f64.sqrt() - 1.0).powi(2)).abs() < 1e-6);
    assert!(r.witness_b.max_abs_diff(&r.witness_a.scaled(2.0)) < 1e-3);
    assert!(r.closed_form_deviation() <= 1e-4);
    assert_monotone(&r.objective_history);
}

#[test]
fn identical_sets_are_at_distance_zero() {
    let spec = ConvexSetSpec::trace_equals(3, 1.0);
    let r = set_distance(&spec, &spec, None, &SetDistanceOptions::default(), &settings()).unwrap();
    assert!(r.distance_squared < 1e-7);
    assert!(r.witness_a.max_abs_diff(&r.witness_b) < 1e-4);
}

#[test]
fn disjoint_frobenius_balls() {
    let n = 2;
    let sa = ConvexSetSpec::psd_cone(n).with_frobenius_ball(SymmetricMatrix::identity(n), 0.5);
    let sb = ConvexSetSpec::psd_cone(n).with_frobenius_ball(SymmetricMatrix::identity(n).scaled(5.0), 0.5);
    let r = set_distance(&sa, &sb, None, &SetDistanceOptions::default(), &settings()).unwrap();
    assert!(r.converged);
    assert!(r.distance_squared > 0.5);
    assert!(sa.membership(&r.witness_a, 1e-6) && sb.membership(&r.witness_b, 1e-6));
    // both witnesses sit on their ball boundaries
    let ra = r.witness_a.sub(&SymmetricMatrix::identity(n)).frobenius_norm();
    let rb = r
        .witness_b
        .sub(&SymmetricMatrix::identity(n).scaled(5.0))
        .frobenius_norm();
    assert!((ra - 0.5).abs() < 1e-4 && (rb - 0.5).abs() < 1e-4, "{ra} {rb}");
    assert!(r.closed_form_deviation() <= 1e-4);
    assert_monotone(&r.objective_history);
}

#[test]
fn swapping_sets_preserves_distance() {
    let sa = ConvexSetSpec::trace_equals(3, 1.0);
    let sb = ConvexSetSpec::psd_cone(3).with_frobenius_ball(SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0]), 0.4);
    let opts = SetDistanceOptions::default();
    let ab = set_distance(&sa, &sb, None, &opts, &settings()).unwrap();
    let ba = set_distance(&sb, &sa, None, &opts, &settings()).unwrap();
    assert!((ab.distance_squared - ba.distance_squared).abs() <= 5e-4);
    assert_monotone(&ab.objective_history);
    assert_monotone(&ba.objective_history);
}

#[test]
fn converged_witness_is_a_fixed_point() {
    let sa = ConvexSetSpec::trace_equals(3, 1.0);
    let sb = ConvexSetSpec::psd_cone(3).with_frobenius_ball(SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0]), 0.4);
    let opts = SetDistanceOptions::default();
    let r = set_distance(&sa, &sb, None, &opts, &settings()).unwrap();
    let (_, v) = project_half_step(&r.witness_a, &sb, &settings()).unwrap();
    assert!(
        (v - r.distance_squared).abs() <= 1e-6 * (1.0 + v),
        "{v} vs {}",
        r.distance_squared
    );
}

#[test]
fn infeasible_set_is_reported() {
    let bad = ConvexSetSpec::trace_equals(2, -1.0);
    let good = ConvexSetSpec::trace_equals(2, 1.0);
    let err = set_distance(&good, &bad, None, &SetDistanceOptions::default(), &settings()).unwrap_err();
    assert!(matches!(err, BwError::InfeasibleSet(_)));
    // two incompatible linear equalities
    let c = SymmetricMatrix::from_diagonal(&[1.0, 0.0]);
    let clash = ConvexSetSpec::psd_cone(2)
        .with_linear_eq(c.clone(), 1.0)
        .with_linear_eq(c, 2.0);
    let err = set_distance(&good, &clash, None, &SetDistanceOptions::default(), &settings()).unwrap_err();
    assert!(matches!(err, BwError::InfeasibleSet(_)), "{err}");
}

#[test]
fn init_outside_first_set_is_rejected() {
    let spec = ConvexSetSpec::trace_equals(2, 1.0);
    let err = set_distance(
        &spec,
        &spec,
        Some(&SymmetricMatrix::identity(2)),
        &SetDistanceOptions::default(),
        &settings(),
    )
    .unwrap_err();
    assert!(matches!(err, BwError::InvalidInput(_)));
}
