//! Semidefinite programs over dense symmetric matrices.
//!
//! Problems are described declaratively with [`SdpProblem`] and solved by a
//! built-in homogeneous primal-dual interior-point method using
//! Nesterov-Todd scaling. Rectangular variables (couplings) are expressed by
//! placing them inside symmetric PSD blocks.
//!
//! ```
//! use bwkit_sdp::{AffineMatrixExpr, LinearExpr, SdpProblem, Sense, SolverSettings, VarKind};
//! use nalgebra::DMatrix;
//!
//! // maximize x subject to [[1, x], [x, 1]] ⪰ 0
//! let mut p = SdpProblem::new();
//! let x = p.add_variable(VarKind::Scalar, "x").unwrap();
//! p.set_objective(Sense::Maximize, LinearExpr::scalar(x, 1.0)).unwrap();
//! p.add_psd_block(
//!     AffineMatrixExpr::new(2)
//!         .with_constant(DMatrix::identity(2, 2))
//!         .entry(x, 0, 0, 1, 0, 1.0),
//! )
//! .unwrap();
//! let sol = p.solve(&SolverSettings::default());
//! assert!(sol.is_optimal());
//! assert!((sol.scalar(x) - 1.0).abs() < 1e-6);
//! ```

mod cone;
mod ipm;
mod model;
mod solution;

pub use model::{AffineMatrixExpr, Direction, LinearExpr, ModelError, SdpProblem, SdpVariable, Sense, VarId, VarKind};
pub use solution::{
    Residuals, SdpSolution, SdpStatus, SolverSettings, DEFAULT_FEASIBILITY_TOLERANCE, DEFAULT_GAP_TOLERANCE,
};
