//! Weighted BW barycenter by SDP and by fixed-point iteration.

use std::time::Instant;

use bwkit_sdp::{LinearExpr, SdpProblem, SdpStatus, Sense, SolverSettings, VarKind};

use crate::bw::bw_distance_squared_psd;
use crate::error::{BwError, Result};
use crate::matrix::{inv_sqrt_pd, sqrt_psd, ClampPolicy, PdMatrix, SymmetricMatrix};
use crate::programs::{add_coupling_block, clean_psd, solve_with_retry, solver_error};
use crate::sets::ConvexSetSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterProblem {
    weights: Vec<f64>,
    matrices: Vec<PdMatrix>,
    constraints: Option<ConvexSetSpec>,
}

impl BarycenterProblem {
    pub fn new(weights: Vec<f64>, matrices: Vec<PdMatrix>) -> Result<Self> {
        if weights.len() != matrices.len() || weights.is_empty() {
            return Err(BwError::InvalidInput(format!(
                "{} weights for {} matrices",
                weights.len(),
                matrices.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(BwError::InvalidInput(format!("weights must be positive, got {w}")));
        }
        let n = matrices[0].dim();
        if let Some(m) = matrices.iter().find(|m| m.dim() != n) {
            return Err(BwError::DimensionMismatch(format!(
                "{0}x{0} and {1}x{1} matrices",
                n,
                m.dim()
            )));
        }
        Ok(Self {
            weights,
            matrices,
            constraints: None,
        })
    }

    /// Restricts the barycenter to a convex set (SDP route only).
    pub fn with_constraints(mut self, spec: ConvexSetSpec) -> Result<Self> {
        spec.validate()?;
        if spec.dimension != self.dim() {
            return Err(BwError::DimensionMismatch(format!(
                "constraint set is {0}x{0}, matrices are {1}x{1}",
                spec.dimension,
                self.dim()
            )));
        }
        self.constraints = Some(spec);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrices(&self) -> &[PdMatrix] {
        &self.matrices
    }

    pub fn constraints(&self) -> Option<&ConvexSetSpec> {
        self.constraints.as_ref()
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    /// `sum_i w_i rho^2(A_i, X)` with the closed form.
    pub fn objective(&self, x: &SymmetricMatrix) -> Result<f64> {
        let mut total = 0.0;
        for (w, a) in self.weights.iter().zip(&self.matrices) {
            total += w * bw_distance_squared_psd(a, x)?.distance_squared;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarycenterRoute {
    Sdp,
    FixedPoint,
}

impl BarycenterRoute {
    pub fn as_str(&self) -> &'static str {
        match self {
            BarycenterRoute::Sdp => "sdp",
            BarycenterRoute::FixedPoint => "fixed_point",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterResult {
    pub x: SymmetricMatrix,
    /// Closed-form weighted objective at `x`.
    pub objective: f64,
    pub route: BarycenterRoute,
    /// Optimal value reported by the SDP solver; `None` for the fixed point.
    /// It bounds `objective` from above, with equality when the relaxation
    /// is tight.
    pub solver_objective: Option<f64>,
    /// Fixed-point iterations, or interior-point iterations for the SDP.
    pub iterations: usize,
    /// Fixed point: last step size `||X_{k+1} - X_k||_F`; SDP: duality gap.
    pub residual: f64,
    pub converged: bool,
}

/// minimize `sum_i w_i (Tr A_i + Tr X - 2 Tr(sqrt(A_i) K_i))`
/// s.t. `[[X, K_i^T], [K_i, I]] ⪰ 0` for every `i`.
pub fn solve_barycenter_sdp(p: &BarycenterProblem, settings: &SolverSettings) -> Result<BarycenterResult> {
    let n = p.dim();
    let mut prog = SdpProblem::new();
    let x = prog.add_variable(VarKind::Symmetric(n), "X")?;
    let mut objective = LinearExpr::zero();
    for (i, (w, a)) in p.weights.iter().zip(&p.matrices).enumerate() {
        let k = add_coupling_block(&mut prog, x, n, &format!("K{}", i + 1))?;
        let root = sqrt_psd(a, ClampPolicy::default())?;
        objective = objective
            .plus_trace(x, *w)
            .plus_inner(k, root.as_matrix() * (-2.0 * w))
            .plus_constant(w * a.trace());
    }
    prog.set_objective(Sense::Minimize, objective)?;
    if let Some(spec) = &p.constraints {
        spec.apply(&mut prog, x)?;
    }
    let sol = solve_with_retry(&prog, settings);
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => return Err(BwError::InfeasibleSet("barycenter constraint set is empty".into())),
        _ => return Err(solver_error(&sol, "barycenter SDP")),
    }
    let xv = clean_psd(sol.value(x))?;
    Ok(BarycenterResult {
        objective: p.objective(&xv)?,
        x: xv,
        route: BarycenterRoute::Sdp,
        solver_objective: Some(sol.objective_value),
        iterations: sol.iterations,
        residual: sol.residuals.gap,
        converged: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Stop when `||X_{k+1} - X_k||_F <= tol * (1 + ||X_k||_F)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

/// One application of
/// `X -> X^{-1/2} (sum_i w_i sqrt(sqrt(X) A_i sqrt(X)))^2 X^{-1/2}`
/// with normalized weights.
pub fn fixed_point_step(p: &BarycenterProblem, x: &PdMatrix) -> Result<PdMatrix> {
    let weights = p.normalized_weights();
    let root = sqrt_psd(x, ClampPolicy::default())?;
    let inv_root = inv_sqrt_pd(x)?;
    let n = p.dim();
    let mut t = nalgebra::DMatrix::zeros(n, n);
    for (w, a) in weights.iter().zip(&p.matrices) {
        let inner = a.congruence(root.as_matrix());
        t += sqrt_psd(&inner, ClampPolicy::default())?.as_matrix() * *w;
    }
    let next = SymmetricMatrix::from_average(&t * &t).congruence(inv_root.as_matrix());
    PdMatrix::new(next)
}

/// Fixed-point iteration from `x0` (default: `sum_i w_i A_i`, normalized).
///
/// Weights are normalized to sum to one. Hitting `max_iter` returns the last
/// iterate with `converged == false`.
pub fn fixed_point_barycenter(
    p: &BarycenterProblem,
    x0: Option<&PdMatrix>,
    options: &FixedPointOptions,
) -> Result<BarycenterResult> {
    if p.constraints.is_some() {
        return Err(BwError::InvalidInput(
            "the fixed-point route handles unconstrained barycenters only".into(),
        ));
    }
    let mut x = match x0 {
        Some(x) => {
            if x.dim() != p.dim() {
                return Err(BwError::DimensionMismatch(
                    "initial point has the wrong dimension".into(),
                ));
            }
            x.clone()
        }
        None => {
            let weights = p.normalized_weights();
            let mean = weights
                .iter()
                .zip(&p.matrices)
                .fold(SymmetricMatrix::zeros(p.dim()), |acc, (w, a)| {
                    acc.add(&a.as_symmetric().scaled(*w))
                });
            PdMatrix::new(mean)?
        }
    };
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iter {
        iterations += 1;
        let next = fixed_point_step(p, &x)?;
        residual = (next.as_matrix() - x.as_matrix()).norm();
        let scale = 1.0 + x.frobenius_norm();
        x = next;
        if residual <= options.tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("fixed-point barycenter stopped after {iterations} iterations, step {residual:e}");
    }
    let xs = x.into_symmetric();
    Ok(BarycenterResult {
        objective: p.objective(&xs)?,
        x: xs,
        route: BarycenterRoute::FixedPoint,
        solver_objective: None,
        iterations,
        residual,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteComparison {
    pub sdp: BarycenterResult,
    pub fixed_point: BarycenterResult,
    /// `max_ij |X_sdp - X_fp|`
    pub max_entry_deviation: f64,
    pub objective_deviation: f64,
    pub sdp_seconds: f64,
    pub fixed_point_seconds: f64,
}

pub fn compare_routes(
    p: &BarycenterProblem,
    settings: &SolverSettings,
    options: &FixedPointOptions,
) -> Result<RouteComparison> {
    let start = Instant::now();
    let sdp = solve_barycenter_sdp(p, settings)?;
    let sdp_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let fixed_point = fixed_point_barycenter(p, None, options)?;
    let fixed_point_seconds = start.elapsed().as_secs_f64();
    Ok(RouteComparison {
        max_entry_deviation: sdp.x.max_abs_diff(&fixed_point.x),
        objective_deviation: (sdp.objective - fixed_point.objective).abs(),
        sdp,
        fixed_point,
        sdp_seconds,
        fixed_point_seconds,
    })
}
