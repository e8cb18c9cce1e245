use bwkit_sdp::{ModelError, SdpStatus};
use thiserror::Error;

pub type Result<T, E = BwError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BwError {
    #[error("matrix is not symmetric: max asymmetry {max_asymmetry:e} exceeds {tolerance:e}")]
    Asymmetry { max_asymmetry: f64, tolerance: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} below {threshold:e}")]
    NotPsd { min_eigenvalue: f64, threshold: f64 },
    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:e} <= {threshold:e}")]
    NotPd { min_eigenvalue: f64, threshold: f64 },
    #[error("eigensolver did not converge: {0}")]
    Convergence(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver finished with status {status}: {diagnostics}")]
    SolverFailure { status: SdpStatus, diagnostics: String },
    #[error("convex set is infeasible: {0}")]
    InfeasibleSet(String),
    #[error("subproblem is unbounded: {0}")]
    UnboundedSubproblem(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
