use bwkit_core::BwError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    /// 2 input or I/O error, 3 solver failure, 4 validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Validation(_) => 4,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            CliError::Input(_) | CliError::Io(_) => "input_error",
            CliError::Solver(_) => "solver_failure",
            CliError::Validation(_) => "validation_failed",
        }
    }
}

impl From<BwError> for CliError {
    fn from(e: BwError) -> Self {
        let msg = e.to_string();
        match e {
            BwError::SolverFailure { .. } | BwError::Convergence(_) | BwError::UnboundedSubproblem(_) => {
                CliError::Solver(msg)
            }
            BwError::Validation(_) => CliError::Validation(msg),
            _ => CliError::Input(msg),
        }
    }
}
