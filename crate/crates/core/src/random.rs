//! Seeded random positive-definite matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{BwError, Result};
use crate::matrix::{PdMatrix, SymmetricMatrix};

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Q diag(lambda) Q^T` with `lambda` log-uniform in `[1, cond]`.
pub fn random_pd<R: Rng + ?Sized>(n: usize, cond: f64, rng: &mut R) -> Result<PdMatrix> {
    if n == 0 {
        return Err(BwError::InvalidInput("dimension must be at least 1".into()));
    }
    if !(cond >= 1.0) || !cond.is_finite() {
        return Err(BwError::InvalidInput(format!(
            "condition number must be >= 1, got {cond}"
        )));
    }
    let q = random_orthogonal(n, rng);
    let log_cond = cond.ln();
    let lambda = DVector::from_fn(n, |_, _| (rng.random::<f64>() * log_cond).exp());
    let m = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
    PdMatrix::new(SymmetricMatrix::from_average(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::eig_sym;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_and_deterministic() {
        let q = random_orthogonal(4, &mut ChaCha8Rng::seed_from_u64(1));
        assert!((q.tr_mul(&q) - DMatrix::<f64>::identity(4, 4)).norm() < 1e-12);
        let q2 = random_orthogonal(4, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(q, q2);
    }

    #[test]
    fn condition_number_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = random_pd(6, 1e4, &mut rng).unwrap();
            let e = eig_sym(&p).unwrap();
            assert!(e.min_eigenvalue() >= 1.0 - 1e-9);
            assert!(e.max_eigenvalue() <= 1e4 * (1.0 + 1e-9));
        }
        let p = random_pd(3, 1.0, &mut rng).unwrap();
        assert!(p.max_abs_diff(&SymmetricMatrix::identity(3)) < 1e-12);
    }
}
