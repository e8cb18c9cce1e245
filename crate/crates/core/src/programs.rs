//! SDP formulations: the distance program, the orthogonal-relaxation
//! program, BW-ball constraints and ball-constrained minimization.

use bwkit_sdp::{
    AffineMatrixExpr, Direction, LinearExpr, SdpProblem, SdpSolution, SdpStatus, Sense, SolverSettings, VarId, VarKind,
};
use nalgebra::DMatrix;

use crate::bw::bw_distance_squared_psd;
use crate::error::{BwError, Result};
use crate::matrix::{eig_sym, project_psd, sqrt_psd, ClampPolicy, PdMatrix, SymmetricMatrix};
use crate::sets::{frobenius_arrow, ConvexSetSpec};

/// Slack on `rho^2(center, X*) <= d^2` when re-validating a ball solve with
/// the closed form.
pub const BALL_SOUNDNESS_TOLERANCE: f64 = 1e-3;

/// Tolerance multiplier for the single retry after a numerical failure.
pub const RETRY_TOLERANCE_FACTOR: f64 = 100.0;

/// Solves `p`; on a numerical failure retries once with both tolerances
/// loosened by [`RETRY_TOLERANCE_FACTOR`].
pub fn solve_with_retry(p: &SdpProblem, settings: &SolverSettings) -> SdpSolution {
    let sol = p.solve(settings);
    if sol.status != SdpStatus::NumericalFailure {
        return sol;
    }
    let mut relaxed = settings.clone();
    relaxed.feasibility_tolerance *= RETRY_TOLERANCE_FACTOR;
    relaxed.gap_tolerance *= RETRY_TOLERANCE_FACTOR;
    log::warn!(
        "solver stalled (primal {:e}, dual {:e}, gap {:e}); retrying at tolerance {:e}",
        sol.residuals.primal,
        sol.residuals.dual,
        sol.residuals.gap,
        relaxed.feasibility_tolerance.max(relaxed.gap_tolerance)
    );
    p.solve(&relaxed)
}

pub(crate) fn solver_error(sol: &SdpSolution, what: &str) -> BwError {
    BwError::SolverFailure {
        status: sol.status,
        diagnostics: format!(
            "{what}: {} iterations, primal residual {:e}, dual residual {:e}, gap {:e}",
            sol.iterations, sol.residuals.primal, sol.residuals.dual, sol.residuals.gap
        ),
    }
}

/// Symmetrizes a solver iterate and clips its round-off negative eigenvalues.
pub(crate) fn clean_psd(m: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    let s = SymmetricMatrix::from_average(m.clone());
    let e = eig_sym(&s)?;
    if e.min_eigenvalue() < -1e-6 * (1.0 + e.max_eigenvalue().abs()) {
        log::warn!(
            "solver iterate has eigenvalue {:e}; projecting onto the PSD cone",
            e.min_eigenvalue()
        );
    }
    project_psd(&s)
}

/// Declares a fresh `n x n` coupling `K` with `[[X, K^T], [K, I]] ⪰ 0`.
pub(crate) fn add_coupling_block(p: &mut SdpProblem, x: VarId, n: usize, name: &str) -> Result<VarId> {
    let k = p.add_variable(VarKind::Rectangular { rows: n, cols: n }, name)?;
    let mut constant = DMatrix::zeros(2 * n, 2 * n);
    constant.view_mut((n, n), (n, n)).fill_with_identity();
    p.add_psd_block(
        AffineMatrixExpr::new(2 * n)
            .with_constant(constant)
            .place(x, 0, 0, 1.0)
            .place(k, n, 0, 1.0),
    )?;
    Ok(k)
}

fn same_dim(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(BwError::DimensionMismatch(format!(
            "{0}x{0} vs {1}x{1}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// minimize `Tr A + Tr B - 2 Tr(sqrt(A) K)` s.t. `[[B, K^T], [K, I]] ⪰ 0`.
///
/// Returns the problem and the handle of `K`.
pub fn build_distance_sdp(a: &PdMatrix, b: &PdMatrix) -> Result<(SdpProblem, VarId)> {
    same_dim(a, b)?;
    let n = a.dim();
    let root = sqrt_psd(a, ClampPolicy::default())?;
    let mut p = SdpProblem::new();
    let k = p.add_variable(VarKind::Rectangular { rows: n, cols: n }, "K")?;
    // Tr(sqrt(A) K) = <sqrt(A), K> because sqrt(A) is symmetric
    p.set_objective(
        Sense::Minimize,
        LinearExpr::inner(k, root.as_matrix() * -2.0).plus_constant(a.trace() + b.trace()),
    )?;
    let mut constant = DMatrix::identity(2 * n, 2 * n);
    constant.view_mut((0, 0), (n, n)).copy_from(b.as_matrix());
    p.add_psd_block(AffineMatrixExpr::new(2 * n).with_constant(constant).place(k, n, 0, 1.0))?;
    Ok((p, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSdpResult {
    pub distance_squared: f64,
    pub coupling: DMatrix<f64>,
    /// `||K^T K - B||_F`; zero when the relaxation is tight.
    pub tightness_residual: f64,
    /// `Tr(sqrt(A) K)`
    pub fidelity_estimate: f64,
    pub solver_gap: f64,
    pub iterations: usize,
}

pub fn solve_distance(a: &PdMatrix, b: &PdMatrix, settings: &SolverSettings) -> Result<DistanceSdpResult> {
    let (p, k) = build_distance_sdp(a, b)?;
    let sol = solve_with_retry(&p, settings);
    if !sol.is_optimal() {
        return Err(solver_error(&sol, "distance SDP"));
    }
    let kv = sol.value(k).clone();
    let root = sqrt_psd(a, ClampPolicy::default())?;
    let raw = sol.objective_value;
    if raw < -1e-6 {
        log::warn!("distance SDP returned {raw:e}");
    }
    Ok(DistanceSdpResult {
        distance_squared: raw.max(0.0),
        tightness_residual: (kv.tr_mul(&kv) - b.as_matrix()).norm(),
        fidelity_estimate: (root.as_matrix() * &kv).trace(),
        coupling: kv,
        solver_gap: sol.residuals.gap,
        iterations: sol.iterations,
    })
}

/// Sum of singular values, from the eigenvalues of `M^T M`.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    m.tr_mul(m)
        .symmetric_eigenvalues()
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum()
}

/// Where the coupling `U` sits in the `2n x 2n` block with `G` top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingPlacement {
    /// `[[G, U^T], [U, I]] ⪰ 0`, i.e. `U^T U ⪯ G`.
    Lower,
    /// `[[G, U], [U^T, I]] ⪰ 0`, i.e. `U U^T ⪯ G`.
    Upper,
}

/// maximize `Tr(K U)` over the block constraint given by `placement`.
///
/// With `G = I` the optimum is the nuclear norm of `K`, attained at an
/// orthogonal `U`. For general PD `G` it is `||sqrt(G) K||_*` in the lower
/// placement and `||K sqrt(G)||_*` in the upper one.
pub fn build_lemma_sdp(k: &DMatrix<f64>, g: &PdMatrix, placement: CouplingPlacement) -> Result<(SdpProblem, VarId)> {
    let n = k.nrows();
    if !k.is_square() || g.dim() != n {
        return Err(BwError::DimensionMismatch(format!(
            "K is {}x{}, G is {1}x{1}",
            k.nrows(),
            k.ncols()
        )));
    }
    let mut p = SdpProblem::new();
    let u = p.add_variable(VarKind::Rectangular { rows: n, cols: n }, "U")?;
    // Tr(K U) = <K^T, U>
    p.set_objective(Sense::Maximize, LinearExpr::inner(u, k.transpose()))?;
    let mut constant = DMatrix::identity(2 * n, 2 * n);
    constant.view_mut((0, 0), (n, n)).copy_from(g.as_matrix());
    let (row, col) = match placement {
        CouplingPlacement::Lower => (n, 0),
        CouplingPlacement::Upper => (0, n),
    };
    p.add_psd_block(
        AffineMatrixExpr::new(2 * n)
            .with_constant(constant)
            .place(u, row, col, 1.0),
    )?;
    Ok((p, u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaResult {
    pub value: f64,
    pub u: DMatrix<f64>,
    /// The predicted optimum, `||sqrt(G) K||_*` or `||K sqrt(G)||_*`.
    pub nuclear_norm: f64,
    /// `||U^T U - G||_F` (lower) or `||U U^T - G||_F` (upper).
    pub tightness_residual: f64,
}

pub fn solve_lemma(
    k: &DMatrix<f64>,
    g: &PdMatrix,
    placement: CouplingPlacement,
    settings: &SolverSettings,
) -> Result<LemmaResult> {
    let (p, u) = build_lemma_sdp(k, g, placement)?;
    let sol = solve_with_retry(&p, settings);
    if !sol.is_optimal() {
        return Err(solver_error(&sol, "lemma SDP"));
    }
    let uv = sol.value(u).clone();
    let root = sqrt_psd(g, ClampPolicy::default())?;
    let (weighted, gram) = match placement {
        CouplingPlacement::Lower => (root.as_matrix() * k, uv.tr_mul(&uv)),
        CouplingPlacement::Upper => (k * root.as_matrix(), &uv * uv.transpose()),
    };
    Ok(LemmaResult {
        value: sol.objective_value,
        nuclear_norm: nuclear_norm(&weighted),
        tightness_residual: (gram - g.as_matrix()).norm(),
        u: uv,
    })
}

/// `{X : rho^2(center, X) <= radius_squared}`
#[derive(Debug, Clone, PartialEq)]
pub struct BwBall {
    pub center: PdMatrix,
    pub radius_squared: f64,
}

impl BwBall {
    pub fn new(center: PdMatrix, radius_squared: f64) -> Result<Self> {
        if !(radius_squared > 0.0) || !radius_squared.is_finite() {
            return Err(BwError::InvalidInput(format!(
                "ball radius squared must be positive, got {radius_squared}"
            )));
        }
        Ok(Self { center, radius_squared })
    }
}

/// Adds the lifted ball constraint on `x`:
/// `[[X, K^T], [K, I]] ⪰ 0` and `Tr A + Tr X - 2 Tr(sqrt(A) K) <= d^2`
/// with a fresh coupling `K`, which is returned.
pub fn bw_ball_constraints(p: &mut SdpProblem, ball: &BwBall, x: VarId, name: &str) -> Result<VarId> {
    let n = match p.variable(x)?.kind {
        VarKind::Symmetric(n) => n,
        other => {
            return Err(BwError::DimensionMismatch(format!(
                "ball variable must be symmetric, got {other:?}"
            )));
        }
    };
    if ball.center.dim() != n {
        return Err(BwError::DimensionMismatch(format!(
            "ball center is {0}x{0}, variable is {n}x{n}",
            ball.center.dim()
        )));
    }
    let root = sqrt_psd(&ball.center, ClampPolicy::default())?;
    let k = add_coupling_block(p, x, n, name)?;
    p.add_linear_ineq(
        LinearExpr::trace(x).plus_inner(k, root.as_matrix() * -2.0),
        Direction::LessEq,
        ball.radius_squared - ball.center.trace(),
    )?;
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    FrobeniusNorm,
    Trace,
    /// `Tr(C X)`
    Linear(SymmetricMatrix),
}

impl ObjectiveSpec {
    pub fn evaluate(&self, x: &SymmetricMatrix) -> f64 {
        match self {
            ObjectiveSpec::FrobeniusNorm => x.frobenius_norm(),
            ObjectiveSpec::Trace => x.trace(),
            ObjectiveSpec::Linear(c) => c.as_matrix().component_mul(x.as_matrix()).sum(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveSpec::FrobeniusNorm => "frobenius",
            ObjectiveSpec::Trace => "trace",
            ObjectiveSpec::Linear(_) => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallSolveResult {
    pub x: SymmetricMatrix,
    /// Objective re-evaluated at `x`.
    pub value: f64,
    /// Optimal value reported by the solver.
    pub solver_value: f64,
    /// Closed-form `rho^2(center_i, x)` for every ball.
    pub ball_distances: Vec<f64>,
    pub iterations: usize,
}

/// minimize `f(X)` over `X ⪰ 0` in `base_set` and inside every ball.
///
/// The returned point is re-validated against every ball with the closed
/// form; a violation beyond [`BALL_SOUNDNESS_TOLERANCE`] is a
/// [`BwError::Validation`] error.
pub fn solve_ball_constrained(
    objective: &ObjectiveSpec,
    base_set: Option<&ConvexSetSpec>,
    balls: &[BwBall],
    settings: &SolverSettings,
) -> Result<BallSolveResult> {
    let n = match (balls.first(), base_set) {
        (Some(b), _) => b.center.dim(),
        (None, Some(s)) => s.dimension,
        (None, None) => return Err(BwError::InvalidInput("need at least one ball or a base set".into())),
    };
    if let Some(s) = base_set {
        s.validate()?;
        if s.dimension != n {
            return Err(BwError::DimensionMismatch(format!(
                "base set is {}x{0}, balls are {n}x{n}",
                s.dimension
            )));
        }
    }
    if let ObjectiveSpec::Linear(c) = objective {
        if c.dim() != n {
            return Err(BwError::DimensionMismatch(format!(
                "objective is {0}x{0}, variable is {n}x{n}",
                c.dim()
            )));
        }
    }
    let mut p = SdpProblem::new();
    let x = p.add_variable(VarKind::Symmetric(n), "X")?;
    match objective {
        ObjectiveSpec::FrobeniusNorm => {
            let t = p.add_variable(VarKind::Scalar, "t")?;
            let m = n * (n + 1) / 2;
            let base = AffineMatrixExpr::new(m + 1).scalar_times(t, DMatrix::identity(m + 1, m + 1));
            p.add_psd_block(frobenius_arrow(x, n, base))?;
            p.set_objective(Sense::Minimize, LinearExpr::scalar(t, 1.0))?;
        }
        ObjectiveSpec::Trace => p.set_objective(Sense::Minimize, LinearExpr::trace(x))?,
        ObjectiveSpec::Linear(c) => p.set_objective(Sense::Minimize, LinearExpr::inner(x, c.as_matrix().clone()))?,
    }
    for (i, ball) in balls.iter().enumerate() {
        bw_ball_constraints(&mut p, ball, x, &format!("K{i}"))?;
    }
    if balls.is_empty() {
        p.add_psd_block(AffineMatrixExpr::new(n).place(x, 0, 0, 1.0))?;
    }
    if let Some(s) = base_set {
        s.apply(&mut p, x)?;
    }
    let sol = solve_with_retry(&p, settings);
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(BwError::InfeasibleSet(
                "the balls and base set have no common point".into(),
            ));
        }
        SdpStatus::Unbounded => return Err(BwError::UnboundedSubproblem("objective is unbounded below".into())),
        SdpStatus::NumericalFailure => return Err(solver_error(&sol, "ball-constrained program")),
    }
    let xv = clean_psd(sol.value(x))?;
    let mut ball_distances = Vec::with_capacity(balls.len());
    for (i, ball) in balls.iter().enumerate() {
        let d2 = bw_distance_squared_psd(&ball.center, &xv)?.distance_squared;
        if d2 > ball.radius_squared + BALL_SOUNDNESS_TOLERANCE {
            return Err(BwError::Validation(format!(
                "ball {i}: closed-form distance squared {d2} exceeds radius squared {}",
                ball.radius_squared
            )));
        }
        ball_distances.push(d2);
    }
    Ok(BallSolveResult {
        value: objective.evaluate(&xv),
        solver_value: sol.objective_value,
        x: xv,
        ball_distances,
        iterations: sol.iterations,
    })
}
