//! Convex subsets of the PSD cone and the BW distance between two of them,
//! computed by alternating exact minimization.

use std::f64::consts::SQRT_2;

use bwkit_sdp::{
    AffineMatrixExpr, Direction, LinearExpr, SdpProblem, SdpStatus, Sense, SolverSettings, VarId, VarKind,
};
use nalgebra::{DMatrix, DVector};

use crate::bw::bw_distance_squared_psd;
use crate::error::{BwError, Result};
use crate::matrix::{eig_sym, sqrt_psd, ClampPolicy, SymmetricMatrix};
use crate::programs::{add_coupling_block, clean_psd, solve_with_retry, solver_error};

/// `Tr(C X) (= or <=) rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coef: SymmetricMatrix,
    pub rhs: f64,
}

/// `||X - center||_F <= radius`
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusBall {
    pub center: SymmetricMatrix,
    pub radius: f64,
}

/// A convex subset of the `n x n` PSD cone. `X ⪰ 0` is always implied.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSetSpec {
    pub dimension: usize,
    pub trace_eq: Option<f64>,
    pub linear_eqs: Vec<LinearConstraint>,
    pub linear_ineqs: Vec<LinearConstraint>,
    pub frobenius_ball: Option<FrobeniusBall>,
}

impl ConvexSetSpec {
    /// The whole PSD cone.
    pub fn psd_cone(n: usize) -> Self {
        Self {
            dimension: n,
            trace_eq: None,
            linear_eqs: Vec::new(),
            linear_ineqs: Vec::new(),
            frobenius_ball: None,
        }
    }

    /// `{X ⪰ 0 : Tr X = c}`
    pub fn trace_equals(n: usize, c: f64) -> Self {
        Self {
            trace_eq: Some(c),
            ..Self::psd_cone(n)
        }
    }

    pub fn with_frobenius_ball(mut self, center: SymmetricMatrix, radius: f64) -> Self {
        self.frobenius_ball = Some(FrobeniusBall { center, radius });
        self
    }

    pub fn with_linear_eq(mut self, coef: SymmetricMatrix, rhs: f64) -> Self {
        self.linear_eqs.push(LinearConstraint { coef, rhs });
        self
    }

    pub fn with_linear_ineq(mut self, coef: SymmetricMatrix, rhs: f64) -> Self {
        self.linear_ineqs.push(LinearConstraint { coef, rhs });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n == 0 {
            return Err(BwError::InvalidInput("set dimension must be at least 1".into()));
        }
        let coefs = self.linear_eqs.iter().chain(&self.linear_ineqs).map(|c| c.coef.dim());
        let centers = self.frobenius_ball.iter().map(|b| b.center.dim());
        if let Some(d) = coefs.chain(centers).find(|&d| d != n) {
            return Err(BwError::DimensionMismatch(format!(
                "set of dimension {n} has a {d}x{d} coefficient"
            )));
        }
        if let Some(b) = &self.frobenius_ball {
            if !(b.radius >= 0.0) {
                return Err(BwError::InvalidInput(format!(
                    "frobenius ball radius {} is negative",
                    b.radius
                )));
            }
        }
        if self.trace_eq.is_some_and(|c| c < 0.0) {
            return Err(BwError::InfeasibleSet(format!(
                "Tr(X) = {} has no PSD solution",
                self.trace_eq.unwrap()
            )));
        }
        self.check_equalities()
    }

    /// Rejects dependent equality rows, which leave the solver's KKT system
    /// singular. Inconsistent rows mean the set is empty.
    fn check_equalities(&self) -> Result<()> {
        let n = self.dimension;
        let mut rows: Vec<(DMatrix<f64>, f64)> = Vec::new();
        if let Some(c) = self.trace_eq {
            rows.push((DMatrix::identity(n, n), c));
        }
        rows.extend(self.linear_eqs.iter().map(|lc| (lc.coef.as_matrix().clone(), lc.rhs)));
        if rows.len() < 2 {
            return Ok(());
        }
        let m = n * (n + 1) / 2;
        let pairs: Vec<_> = svec_pairs(n).collect();
        let a = DMatrix::from_fn(rows.len(), m, |i, k| {
            let (r, c) = pairs[k];
            let w = if r == c { 1.0 } else { SQRT_2 };
            rows[i].0[(r, c)] * w
        });
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let tol = 1e-10 * a.norm().max(1.0);
        let rank = a.rank(tol);
        if rank == rows.len() {
            return Ok(());
        }
        let mut ab = a.clone().insert_column(m, 0.0);
        ab.set_column(m, &b);
        if ab.rank(1e-10 * ab.norm().max(1.0)) > rank {
            return Err(BwError::InfeasibleSet("equality constraints are inconsistent".into()));
        }
        Err(BwError::InvalidInput(
            "equality constraints are linearly dependent".into(),
        ))
    }

    fn is_trace_only(&self) -> bool {
        self.linear_eqs.is_empty() && self.linear_ineqs.is_empty() && self.frobenius_ball.is_none()
    }

    /// Adds the affine and ball constraints on the symmetric variable `x` to
    /// `problem`. `X ⪰ 0` is left to the caller.
    pub fn apply(&self, problem: &mut SdpProblem, x: VarId) -> Result<()> {
        if let Some(c) = self.trace_eq {
            problem.add_linear_eq(LinearExpr::trace(x), c)?;
        }
        for lc in &self.linear_eqs {
            problem.add_linear_eq(LinearExpr::inner(x, lc.coef.as_matrix().clone()), lc.rhs)?;
        }
        for lc in &self.linear_ineqs {
            problem.add_linear_ineq(
                LinearExpr::inner(x, lc.coef.as_matrix().clone()),
                Direction::LessEq,
                lc.rhs,
            )?;
        }
        if let Some(ball) = &self.frobenius_ball {
            let n = self.dimension;
            let m = n * (n + 1) / 2;
            let mut constant = DMatrix::identity(m + 1, m + 1) * ball.radius;
            for (k, (i, j)) in svec_pairs(n).enumerate() {
                let w = if i == j { 1.0 } else { SQRT_2 };
                constant[(k, m)] = -w * ball.center.get(i, j);
                constant[(m, k)] = constant[(k, m)];
            }
            problem.add_psd_block(frobenius_arrow(
                x,
                n,
                AffineMatrixExpr::new(m + 1).with_constant(constant),
            ))?;
        }
        Ok(())
    }

    /// True iff `X ⪰ -tol I` and every constraint holds within `tol`.
    pub fn membership(&self, x: &SymmetricMatrix, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Largest constraint violation of `x`, counting `-lambda_min(X)` for
    /// the cone. Infinite on a dimension mismatch or eigensolver failure.
    pub fn violation(&self, x: &SymmetricMatrix) -> f64 {
        if x.dim() != self.dimension {
            return f64::INFINITY;
        }
        let Ok(e) = eig_sym(x) else {
            return f64::INFINITY;
        };
        let inner = |c: &SymmetricMatrix| c.as_matrix().component_mul(x.as_matrix()).sum();
        let mut worst = (-e.min_eigenvalue()).max(0.0);
        if let Some(c) = self.trace_eq {
            worst = worst.max((x.trace() - c).abs());
        }
        for lc in &self.linear_eqs {
            worst = worst.max((inner(&lc.coef) - lc.rhs).abs());
        }
        for lc in &self.linear_ineqs {
            worst = worst.max(inner(&lc.coef) - lc.rhs);
        }
        if let Some(b) = &self.frobenius_ball {
            worst = worst.max(x.sub(&b.center).frobenius_norm() - b.radius);
        }
        worst
    }

    /// A deterministic point of the set: `(c/n) I` for pure trace sets,
    /// otherwise the maximizer of `t` subject to `X - t I ⪰ 0`, `t <= 1`.
    pub fn default_point(&self, settings: &SolverSettings) -> Result<SymmetricMatrix> {
        self.validate()?;
        let n = self.dimension;
        if self.is_trace_only() {
            let c = self.trace_eq.unwrap_or(n as f64);
            return Ok(SymmetricMatrix::identity(n).scaled(c / n as f64));
        }
        let mut p = SdpProblem::new();
        let x = p.add_variable(VarKind::Symmetric(n), "X")?;
        let t = p.add_variable(VarKind::Scalar, "t")?;
        p.set_objective(Sense::Maximize, LinearExpr::scalar(t, 1.0))?;
        p.add_linear_ineq(LinearExpr::scalar(t, 1.0), Direction::LessEq, 1.0)?;
        p.add_psd_block(
            AffineMatrixExpr::new(n)
                .place(x, 0, 0, 1.0)
                .scalar_times(t, -DMatrix::<f64>::identity(n, n)),
        )?;
        p.add_psd_block(AffineMatrixExpr::new(n).place(x, 0, 0, 1.0))?;
        self.apply(&mut p, x)?;
        let sol = solve_with_retry(&p, settings);
        match sol.status {
            SdpStatus::Optimal => clean_psd(sol.value(x)),
            SdpStatus::Infeasible => Err(BwError::InfeasibleSet(
                "no PSD matrix satisfies the set constraints".into(),
            )),
            _ => Err(solver_error(&sol, "set interior point")),
        }
    }
}

/// `(i, j)` with `i >= j`, in the column-major lower-triangle order.
fn svec_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |j| (j..n).map(move |i| (i, j)))
}

/// Adds `v = svec(X)` to the last column of `base`, giving the arrow matrix
/// `[[r I, v - c], [(v - c)^T, r]]` which is PSD iff `||X - C||_F <= r`.
pub(crate) fn frobenius_arrow(x: VarId, n: usize, base: AffineMatrixExpr) -> AffineMatrixExpr {
    let m = n * (n + 1) / 2;
    svec_pairs(n).enumerate().fold(base, |e, (k, (i, j))| {
        let w = if i == j { 1.0 } else { SQRT_2 };
        e.entry(x, i, j, k, m, w)
    })
}

/// One alternating step: the point of `target` closest to `anchor`.
///
/// Returns the minimizer and `Tr(anchor) + Tr(X) - 2 Tr(sqrt(anchor) K)`,
/// the BW distance squared certified by the SDP.
pub fn project_half_step(
    anchor: &SymmetricMatrix,
    target: &ConvexSetSpec,
    settings: &SolverSettings,
) -> Result<(SymmetricMatrix, f64)> {
    target.validate()?;
    let n = target.dimension;
    if anchor.dim() != n {
        return Err(BwError::DimensionMismatch(format!(
            "anchor is {0}x{0}, set is {n}x{n}",
            anchor.dim()
        )));
    }
    let root = sqrt_psd(anchor, ClampPolicy::default())?;
    let mut p = SdpProblem::new();
    let x = p.add_variable(VarKind::Symmetric(n), "X")?;
    let k = add_coupling_block(&mut p, x, n, "K")?;
    p.set_objective(
        Sense::Minimize,
        LinearExpr::trace(x)
            .plus_inner(k, root.as_matrix() * -2.0)
            .plus_constant(anchor.trace()),
    )?;
    target.apply(&mut p, x)?;
    let sol = solve_with_retry(&p, settings);
    match sol.status {
        SdpStatus::Optimal => Ok((clean_psd(sol.value(x))?, sol.objective_value.max(0.0))),
        SdpStatus::Infeasible => Err(BwError::InfeasibleSet("target set is empty".into())),
        SdpStatus::Unbounded => Err(BwError::UnboundedSubproblem("half-step objective is unbounded".into())),
        SdpStatus::NumericalFailure => Err(solver_error(&sol, "half-step projection")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetDistanceOptions {
    /// Stop when `|v_k - v_{k-1}| <= tol * (1 + v_k)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SetDistanceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetDistanceResult {
    pub distance_squared: f64,
    pub witness_a: SymmetricMatrix,
    pub witness_b: SymmetricMatrix,
    /// Full rounds (projection onto B followed by projection onto A).
    pub iterations: usize,
    /// Closed-form `rho^2` of the current pair after every half-step.
    pub objective_history: Vec<f64>,
    /// SDP optimal value of every half-step.
    pub certified_history: Vec<f64>,
    pub converged: bool,
    /// `rho^2(witness_a, witness_b)` from the closed form.
    pub closed_form_distance_squared: f64,
}

impl SetDistanceResult {
    pub fn closed_form_deviation(&self) -> f64 {
        (self.distance_squared - self.closed_form_distance_squared).abs()
    }
}

/// BW distance between two convex sets by alternating exact minimization,
/// starting from `init` (default: [`ConvexSetSpec::default_point`] of `spec_a`).
///
/// Hitting `max_iter` is not an error: the best-so-far pair is returned with
/// `converged == false`.
pub fn set_distance(
    spec_a: &ConvexSetSpec,
    spec_b: &ConvexSetSpec,
    init: Option<&SymmetricMatrix>,
    options: &SetDistanceOptions,
    settings: &SolverSettings,
) -> Result<SetDistanceResult> {
    spec_a.validate()?;
    spec_b.validate()?;
    if spec_a.dimension != spec_b.dimension {
        return Err(BwError::DimensionMismatch(format!(
            "sets of dimension {} and {}",
            spec_a.dimension, spec_b.dimension
        )));
    }
    if options.max_iter == 0 {
        return Err(BwError::InvalidInput("max_iter must be at least 1".into()));
    }
    let mut a = match init {
        Some(x) => {
            let tol = 1e-6 * (1.0 + x.frobenius_norm());
            if !spec_a.membership(x, tol) {
                return Err(BwError::InvalidInput("initial point is not in the first set".into()));
            }
            x.clone()
        }
        None => spec_a.default_point(settings)?,
    };
    let mut history = Vec::new();
    let mut certified = Vec::new();
    let mut b = a.clone();
    let mut converged = false;
    let mut iterations = 0;
    let mut last = f64::INFINITY;
    let mut closed = f64::INFINITY;
    while iterations < options.max_iter {
        iterations += 1;
        let (nb, vb) = project_half_step(&a, spec_b, settings)?;
        b = nb;
        certified.push(vb);
        history.push(bw_distance_squared_psd(&a, &b)?.distance_squared);
        let (na, va) = project_half_step(&b, spec_a, settings)?;
        a = na;
        certified.push(va);
        closed = bw_distance_squared_psd(&a, &b)?.distance_squared;
        history.push(closed);
        log::debug!("set distance round {iterations}: {vb:.12e} {va:.12e}");
        if (last - closed).abs() <= options.tol * (1.0 + closed) {
            converged = true;
            break;
        }
        last = closed;
    }
    if !converged {
        log::warn!("set distance stopped after {iterations} rounds without converging");
    }
    let distance_squared = certified.last().copied().unwrap_or(closed);
    Ok(SetDistanceResult {
        distance_squared,
        witness_a: a,
        witness_b: b,
        iterations,
        objective_history: history,
        certified_history: certified,
        converged,
        closed_form_distance_squared: closed,
    })
}
