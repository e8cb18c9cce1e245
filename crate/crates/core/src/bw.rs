//! Closed-form Bures-Wasserstein distance.
//!
//! `rho^2(A, B) = Tr A + Tr B - 2 Tr sqrt(sqrt(A) B sqrt(A))`

use crate::error::{BwError, Result};
use crate::matrix::{sqrt_psd, ClampPolicy, PdMatrix, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BwDistanceResult {
    /// `rho^2`, clamped at zero.
    pub distance_squared: f64,
    pub distance: f64,
    /// `Tr sqrt(sqrt(A) B sqrt(A))`
    pub fidelity_term: f64,
    /// True when a negative round-off value of `rho^2` was clamped to zero.
    pub clamped: bool,
}

/// `Tr sqrt(sqrt(A) B sqrt(A))` for positive-definite inputs.
pub fn fidelity_term(a: &PdMatrix, b: &PdMatrix) -> Result<f64> {
    fidelity_term_psd(a, b)
}

/// `rho^2(A, B)` for positive-definite inputs.
pub fn bw_distance_squared(a: &PdMatrix, b: &PdMatrix) -> Result<BwDistanceResult> {
    bw_distance_squared_psd(a, b)
}

/// Fidelity term for PSD inputs, which may be singular (e.g. solver output on
/// the boundary of the cone). Tiny negative eigenvalues are clamped.
pub fn fidelity_term_psd(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<f64> {
    check_dims(a, b)?;
    let ra = sqrt_psd(a, ClampPolicy::default())?;
    let inner = b.congruence(ra.as_matrix());
    let root = sqrt_psd(&inner, ClampPolicy::default())?;
    Ok(root.trace())
}

pub fn bw_distance_squared_psd(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<BwDistanceResult> {
    let fid = fidelity_term_psd(a, b)?;
    let raw = a.trace() + b.trace() - 2.0 * fid;
    let clamped = raw < 0.0;
    if clamped {
        let scale = (a.trace() + b.trace()).abs();
        if raw < -1e-9 * scale.max(1.0) {
            log::warn!("bw distance squared {raw:e} is negative beyond round-off (trace sum {scale:e})");
        } else {
            log::debug!("clamping bw distance squared {raw:e} to zero");
        }
    }
    let distance_squared = raw.max(0.0);
    Ok(BwDistanceResult {
        distance_squared,
        distance: distance_squared.sqrt(),
        fidelity_term: fid,
        clamped,
    })
}

fn check_dims(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(BwError::DimensionMismatch(format!(
            "{0}x{0} vs {1}x{1}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd(diag: &[f64]) -> PdMatrix {
        PdMatrix::new(SymmetricMatrix::from_diagonal(diag)).unwrap()
    }

    #[test]
    fn identity_pair() {
        assert!((fidelity_term(&PdMatrix::identity(5), &PdMatrix::identity(5)).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_pair() {
        let (a, b) = (pd(&[1.0, 4.0]), pd(&[4.0, 1.0]));
        assert!((fidelity_term(&a, &b).unwrap() - 4.0).abs() < 1e-12);
        let r = bw_distance_squared(&a, &b).unwrap();
        assert!((r.distance_squared - 2.0).abs() < 1e-12);
        assert!((r.distance - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn self_distance_vanishes() {
        let a = PdMatrix::new(SymmetricMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap()).unwrap();
        assert!((fidelity_term(&a, &a).unwrap() - a.trace()).abs() < 1e-12);
        assert!(bw_distance_squared(&a, &a).unwrap().distance_squared <= 1e-9 * a.trace());
    }

    #[test]
    fn proportional_pair() {
        // Tr A = 2, c = 1/4: (1 - 1/2)^2 * 2 = 0.5
        let a = PdMatrix::new(SymmetricMatrix::from_row_slice(2, &[1.2, 0.3, 0.3, 0.8]).unwrap()).unwrap();
        let b = a.scaled(0.25).unwrap();
        assert!((bw_distance_squared(&a, &b).unwrap().distance_squared - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_argument_is_accepted() {
        // rho^2(I_2, 0) = 2
        let r = bw_distance_squared_psd(&SymmetricMatrix::identity(2), &SymmetricMatrix::zeros(2)).unwrap();
        assert!((r.distance_squared - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            bw_distance_squared(&PdMatrix::identity(2), &PdMatrix::identity(3)),
            Err(BwError::DimensionMismatch(_))
        ));
    }
}
