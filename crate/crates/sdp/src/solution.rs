use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::model::VarId;

/// Default primal/dual feasibility tolerance.
pub const DEFAULT_FEASIBILITY_TOLERANCE: f64 = 1e-8;
/// Default duality-gap tolerance (absolute or relative, whichever is met first).
pub const DEFAULT_GAP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub feasibility_tolerance: f64,
    pub gap_tolerance: f64,
    pub max_iterations: usize,
    /// Rounds of iterative refinement applied to every Newton solve.
    pub refinement_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feasibility_tolerance: DEFAULT_FEASIBILITY_TOLERANCE,
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
            max_iterations: 100,
            refinement_steps: 3,
        }
    }
}

impl SolverSettings {
    /// Same settings with both feasibility and gap tolerance set to `tol`.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.feasibility_tolerance = tol;
        self.gap_tolerance = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SdpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::Unbounded => "unbounded",
            SdpStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scaled residuals at the returned iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// Relative primal infeasibility.
    pub primal: f64,
    /// Relative dual infeasibility.
    pub dual: f64,
    /// Duality gap measure: `min(absolute gap, relative gap)`.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Objective in the sense the problem was posed (including its constant).
    /// Meaningful only when `status` is optimal or a numerical failure.
    pub objective_value: f64,
    /// Objective of the dual iterate, in the same sense and offset.
    pub dual_objective_value: f64,
    pub assignments: BTreeMap<VarId, DMatrix<f64>>,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// Value of `var` at the returned iterate.
    ///
    /// # Panics
    /// If `var` does not belong to the solved problem.
    pub fn value(&self, var: VarId) -> &DMatrix<f64> {
        self.assignments
            .get(&var)
            .unwrap_or_else(|| panic!("variable {var:?} is not part of this solution"))
    }

    /// Value of a scalar variable.
    pub fn scalar(&self, var: VarId) -> f64 {
        self.value(var)[(0, 0)]
    }
}
