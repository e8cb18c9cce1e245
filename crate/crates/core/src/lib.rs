//! Bures-Wasserstein geometry on positive-definite matrices.
//!
//! Distances are available in closed form ([`bw`]) and as semidefinite
//! programs ([`programs`]); each is used to validate the other. On top of
//! these sit set-to-set distances ([`sets`]), weighted barycenters
//! ([`barycenter`]) and BW-ball constrained minimization.
//!
//! ```
//! use bwkit_core::{bw_distance_squared, PdMatrix, SymmetricMatrix};
//!
//! let a = PdMatrix::new(SymmetricMatrix::from_diagonal(&[1.0, 4.0])).unwrap();
//! let b = PdMatrix::new(SymmetricMatrix::from_diagonal(&[4.0, 1.0])).unwrap();
//! let r = bw_distance_squared(&a, &b).unwrap();
//! assert!((r.distance_squared - 2.0).abs() < 1e-12);
//! ```

pub mod barycenter;
pub mod bw;
pub mod error;
pub mod matrix;
pub mod programs;
pub mod random;
pub mod sets;

pub use barycenter::{
    compare_routes, fixed_point_barycenter, fixed_point_step, solve_barycenter_sdp, BarycenterProblem,
    BarycenterResult, BarycenterRoute, FixedPointOptions, RouteComparison,
};
pub use bw::{bw_distance_squared, bw_distance_squared_psd, fidelity_term, fidelity_term_psd, BwDistanceResult};
pub use error::{BwError, Result};
pub use matrix::{
    eig_sym, frobenius_norm, inv_sqrt_pd, is_pd, project_psd, sqrt_psd, symmetrize, trace, ClampPolicy,
    EigenDecomposition, PdMatrix, SymmetricMatrix,
};
pub use programs::{
    build_distance_sdp, build_lemma_sdp, bw_ball_constraints, nuclear_norm, solve_ball_constrained, solve_distance,
    solve_lemma, BallSolveResult, BwBall, CouplingPlacement, DistanceSdpResult, LemmaResult, ObjectiveSpec,
};
pub use sets::{project_half_step, set_distance, ConvexSetSpec, SetDistanceOptions, SetDistanceResult};

pub use bwkit_sdp::{SdpStatus, SolverSettings};
