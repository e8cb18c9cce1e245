use bwkit_sdp::{AffineMatrixExpr, Direction, LinearExpr, SdpProblem, SdpStatus, Sense, SolverSettings, VarKind};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng))
}

/// Nuclear norm from the eigenvalues of `M^T M`; independent of the solver.
fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    m.tr_mul(m)
        .symmetric_eigenvalues()
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum()
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// maximize Tr(K U) subject to [[G, U^T], [U, I]] ⪰ 0.
fn lemma_problem(k: &DMatrix<f64>, g: &DMatrix<f64>) -> (SdpProblem, bwkit_sdp::VarId) {
    let n = k.nrows();
    let mut p = SdpProblem::new();
    let u = p.add_variable(VarKind::Rectangular { rows: n, cols: n }, "U").unwrap();
    // Tr(K U) = <K^T, U>
    p.set_objective(Sense::Maximize, LinearExpr::inner(u, k.transpose()))
        .unwrap();
    let mut constant = DMatrix::identity(2 * n, 2 * n);
    constant.view_mut((0, 0), (n, n)).copy_from(g);
    p.add_psd_block(AffineMatrixExpr::new(2 * n).with_constant(constant).place(u, n, 0, 1.0))
        .unwrap();
    (p, u)
}

#[test]
fn scalar_lower_bound_toy() {
    let mut p = SdpProblem::new();
    let x = p.add_variable(VarKind::Scalar, "x").unwrap();
    p.set_objective(Sense::Minimize, LinearExpr::scalar(x, 1.0)).unwrap();
    p.add_linear_ineq(LinearExpr::scalar(x, 1.0), Direction::GreaterEq, 3.0)
        .unwrap();
    let sol = p.solve(&SolverSettings::default());
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.objective_value - 3.0).abs() < 1e-7);
    assert!((sol.scalar(x) - 3.0).abs() < 1e-7);
}

#[test]
fn two_by_two_psd_bound() {
    // [[1, x], [x, 1]] ⪰ 0 iff |x| <= 1
    let mut p = SdpProblem::new();
    let x = p.add_variable(VarKind::Scalar, "x").unwrap();
    p.set_objective(Sense::Maximize, LinearExpr::scalar(x, 1.0)).unwrap();
    p.add_psd_block(
        AffineMatrixExpr::new(2)
            .with_constant(DMatrix::identity(2, 2))
            .entry(x, 0, 0, 1, 0, 1.0),
    )
    .unwrap();
    let sol = p.solve(&SolverSettings::default());
    assert!(sol.is_optimal());
    assert!((sol.objective_value - 1.0).abs() < 1e-7, "{}", sol.objective_value);
    assert!(sol.residuals.primal <= 1e-8 && sol.residuals.gap <= 1e-8);
}

#[test]
fn min_trace_above_identity() {
    let mut p = SdpProblem::new();
    let x = p.add_variable(VarKind::Symmetric(3), "X").unwrap();
    p.set_objective(Sense::Minimize, LinearExpr::trace(x)).unwrap();
    p.add_psd_block(
        AffineMatrixExpr::new(3)
            .with_constant(-DMatrix::<f64>::identity(3, 3))
            .place(x, 0, 0, 1.0),
    )
    .unwrap();
    let sol = p.solve(&SolverSettings::default());
    assert!(sol.is_optimal());
    assert!((sol.objective_value - 3.0).abs() < 1e-7);
    assert!((sol.value(x) - DMatrix::<f64>::identity(3, 3)).amax() < 1e-6);
}

#[test]
fn negative_trace_is_infeasible() {
    let mut p = SdpProblem::new();
    let x = p.add_variable(VarKind::Symmetric(2), "X").unwrap();
    p.set_objective(Sense::Minimize, LinearExpr::trace(x)).unwrap();
    p.add_linear_eq(LinearExpr::trace(x), -1.0).unwrap();
    p.add_psd_block(AffineMatrixExpr::new(2).place(x, 0, 0, 1.0)).unwrap();
    let sol = p.solve(&SolverSettings::default());
    assert_eq!(sol.status, SdpStatus::Infeasible);
}

#[test]
fn unbounded_below_is_reported() {
    // minimize -t subject to [[t, 0], [0, 1]] ⪰ 0
    let mut p = SdpProblem::new();
    let t = p.add_variable(VarKind::Scalar, "t").unwrap();
    p.set_objective(Sense::Minimize, LinearExpr::scalar(t, -1.0)).unwrap();
    p.add_psd_block(
        AffineMatrixExpr::new(2)
            .with_constant(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]))
            .entry(t, 0, 0, 0, 0, 1.0),
    )
    .unwrap();
    let sol = p.solve(&SolverSettings::default());
    assert_eq!(sol.status, SdpStatus::Unbounded);
}

#[test]
fn lemma_with_diagonal_weight() {
    let k = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
    let (p, u) = lemma_problem(&k, &DMatrix::identity(2, 2));
    let sol = p.solve(&SolverSettings::default());
    assert!(sol.is_optimal());
    assert!((sol.objective_value - 5.0).abs() < 1e-7);
    assert!((sol.value(u) - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
}

#[test]
fn lemma_relaxation_is_tight_on_random_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..12 {
        let n = 2 + trial % 5;
        let k = gaussian(n, &mut rng);
        let (p, u) = lemma_problem(&k, &DMatrix::identity(n, n));
        let sol = p.solve(&SolverSettings::default());
        assert!(sol.is_optimal(), "trial {trial}: {:?}", sol.status);
        let nuc = nuclear_norm(&k);
        assert!(
            (sol.objective_value - nuc).abs() <= 1e-6,
            "trial {trial}: {} vs {nuc}",
            sol.objective_value
        );
        let uu = sol.value(u);
        let orth = (uu.tr_mul(uu) - DMatrix::<f64>::identity(n, n)).norm();
        assert!(orth <= 1e-5, "trial {trial}: ||U'U - I|| = {orth:e}");
    }
}

#[test]
fn generalized_lemma_matches_weighted_nuclear_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..8 {
        let n = 2 + trial % 4;
        let k = gaussian(n, &mut rng);
        let f = gaussian(n, &mut rng);
        let g = &f * f.transpose() + DMatrix::<f64>::identity(n, n) * 0.5;
        let (p, _) = lemma_problem(&k, &g);
        let sol = p.solve(&SolverSettings::default());
        assert!(sol.is_optimal());
        let want = nuclear_norm(&(sym_sqrt(&g) * &k));
        assert!(
            (sol.objective_value - want).abs() <= 1e-6 * (1.0 + want),
            "{} vs {want}",
            sol.objective_value
        );
    }
}

#[test]
fn transposed_coupling_placement_matches_right_weighted_nuclear_norm() {
    // maximize Tr(K U) subject to [[G, U], [U^T, I]] ⪰ 0, i.e. U U^T ⪯ G.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..4 {
        let n = 2 + trial;
        let k = gaussian(n, &mut rng);
        let f = gaussian(n, &mut rng);
        let g = &f * f.transpose() + DMatrix::<f64>::identity(n, n);
        let mut p = SdpProblem::new();
        let u = p.add_variable(VarKind::Rectangular { rows: n, cols: n }, "U").unwrap();
        p.set_objective(Sense::Maximize, LinearExpr::inner(u, k.transpose()))
            .unwrap();
        let mut constant = DMatrix::identity(2 * n, 2 * n);
        constant.view_mut((0, 0), (n, n)).copy_from(&g);
        p.add_psd_block(AffineMatrixExpr::new(2 * n).with_constant(constant).place(u, 0, n, 1.0))
            .unwrap();
        let sol = p.solve(&SolverSettings::default());
        assert!(sol.is_optimal());
        let want = nuclear_norm(&(&k * sym_sqrt(&g)));
        assert!(
            (sol.objective_value - want).abs() <= 1e-6 * (1.0 + want),
            "{} vs {want}",
            sol.objective_value
        );
    }
}

#[test]
fn objective_matches_independent_feasible_point() {
    // minimize <C, X> s.t. X ⪰ 0, Tr X = 1 has value lambda_min(C).
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = gaussian(4, &mut rng);
    let c = &f + f.transpose();
    let mut p = SdpProblem::new();
    let x = p.add_variable(VarKind::Symmetric(4), "X").unwrap();
    p.set_objective(Sense::Minimize, LinearExpr::inner(x, c.clone()))
        .unwrap();
    p.add_linear_eq(LinearExpr::trace(x), 1.0).unwrap();
    p.add_psd_block(AffineMatrixExpr::new(4).place(x, 0, 0, 1.0)).unwrap();
    let sol = p.solve(&SolverSettings::default());
    assert!(sol.is_optimal());
    let eig = c.clone().symmetric_eigen();
    let (imin, lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc });
    // the feasible point v v^T attains lambda_min
    let v = eig.eigenvectors.column(imin);
    let feasible_value = (v.transpose() * &c * v)[(0, 0)];
    assert!((feasible_value - lmin).abs() < 1e-10);
    assert!((sol.objective_value - feasible_value).abs() <= 1e-7);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

    // min <C, X> s.t. Tr X = 1, X ⪰ 0 is the smallest eigenvalue of C.
    #[test]
    fn min_eigenvalue_program(n in 1usize..6, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = gaussian(n, &mut rng);
        let c = (&m + m.transpose()) * 0.5;
        let mut p = SdpProblem::new();
        let x = p.add_variable(VarKind::Symmetric(n), "X").unwrap();
        p.set_objective(Sense::Minimize, LinearExpr::inner(x, c.clone())).unwrap();
        p.add_linear_eq(LinearExpr::zero().plus_trace(x, 1.0), 1.0).unwrap();
        p.add_psd_block(AffineMatrixExpr::new(n).place(x, 0, 0, 1.0)).unwrap();
        let sol = p.solve(&SolverSettings::default());
        proptest::prop_assert_eq!(sol.status, SdpStatus::Optimal);
        let want = c.symmetric_eigenvalues().min();
        proptest::prop_assert!((sol.objective_value - want).abs() < 1e-6 * (1.0 + want.abs()));
    }
}
