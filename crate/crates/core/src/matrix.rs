//! Dense symmetric linear algebra: validated symmetric / positive-definite
//! matrix types, symmetric eigendecomposition and spectral matrix functions.

use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{BwError, Result};

/// Relative threshold below which eigenvalues fail positive-definiteness checks:
/// an eigenvalue must exceed `PD_TOLERANCE * max(1, lambda_max)`.
pub const PD_TOLERANCE: f64 = 1e-10;

/// Eigenvalues in `[-NEG_EIG_TOLERANCE * lambda_max, 0)` are clamped to zero
/// by [`sqrt_psd`] under [`ClampPolicy::default`].
pub const NEG_EIG_TOLERANCE: f64 = 1e-10;

/// Relative asymmetry accepted by [`symmetrize`]:
/// `max |raw - raw^T| <= ASYM_TOLERANCE * (1 + max |raw|)`.
pub const ASYM_TOLERANCE: f64 = 1e-8;

const EIGEN_MAX_ITER: usize = 10_000;

/// Dense real symmetric matrix. Exactly symmetric by construction.
#[derive(Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymmetricMatrix{}", self.0)
    }
}

impl SymmetricMatrix {
    /// Averages `m` with its transpose, without any tolerance check. Used
    /// for computed results whose asymmetry is pure round-off.
    ///
    /// # Panics
    /// If `m` is not square or is empty.
    pub fn from_average(m: DMatrix<f64>) -> Self {
        assert!(
            m.is_square() && m.nrows() > 0,
            "symmetric matrix must be square and non-empty"
        );
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_average(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_average(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_average(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Row-major `n x n` entries, checked with [`symmetrize`].
    pub fn from_row_slice(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(BwError::DimensionMismatch(format!(
                "{} entries for a {n}x{n} matrix",
                entries.len()
            )));
        }
        symmetrize(&DMatrix::from_row_slice(n, n, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        trace(self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn add(&self, other: &SymmetricMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymmetricMatrix) -> Self {
        Self(&self.0 - &other.0)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &SymmetricMatrix) -> f64 {
        (&self.0 - &other.0).amax()
    }

    /// `B^T S B` for a square `B` of matching order.
    pub fn congruence(&self, b: &DMatrix<f64>) -> Self {
        Self::from_average(b.transpose() * &self.0 * b)
    }

    /// Row-major rows, for serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// `(raw + raw^T) / 2`, rejecting inputs whose asymmetry exceeds
/// [`ASYM_TOLERANCE`] (relative to the largest entry).
pub fn symmetrize(raw: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    symmetrize_with_tolerance(raw, ASYM_TOLERANCE)
}

pub fn symmetrize_with_tolerance(raw: &DMatrix<f64>, rel_tol: f64) -> Result<SymmetricMatrix> {
    if !raw.is_square() || raw.nrows() == 0 {
        return Err(BwError::DimensionMismatch(format!(
            "expected a non-empty square matrix, got {}x{}",
            raw.nrows(),
            raw.ncols()
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(BwError::InvalidInput("matrix has non-finite entries".into()));
    }
    let max_asymmetry = (raw - raw.transpose()).amax();
    let tolerance = rel_tol * (1.0 + raw.amax());
    if max_asymmetry > tolerance {
        return Err(BwError::Asymmetry {
            max_asymmetry,
            tolerance,
        });
    }
    Ok(SymmetricMatrix::from_average(raw.clone()))
}

/// Symmetric positive-definite matrix with its smallest eigenvalue recorded.
#[derive(Clone, PartialEq)]
pub struct PdMatrix {
    base: SymmetricMatrix,
    min_eigenvalue: f64,
}

impl fmt::Debug for PdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PdMatrix(min_eig={:e}){}", self.min_eigenvalue, self.base.0)
    }
}

impl PdMatrix {
    pub fn new(base: SymmetricMatrix) -> Result<Self> {
        let eig = eig_sym(&base)?;
        let lmax = eig.max_eigenvalue();
        let lmin = eig.min_eigenvalue();
        let threshold = pd_threshold(lmax);
        if !(lmin > threshold) {
            return Err(BwError::NotPd {
                min_eigenvalue: lmin,
                threshold,
            });
        }
        Ok(Self {
            base,
            min_eigenvalue: lmin,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            base: SymmetricMatrix::identity(n),
            min_eigenvalue: 1.0,
        }
    }

    /// Smallest eigenvalue found at validation time.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        &self.base
    }

    pub fn into_symmetric(self) -> SymmetricMatrix {
        self.base
    }

    /// `c * P` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        PdMatrix::new(self.base.scaled(c))
    }
}

impl Deref for PdMatrix {
    type Target = SymmetricMatrix;

    fn deref(&self) -> &SymmetricMatrix {
        &self.base
    }
}

impl TryFrom<SymmetricMatrix> for PdMatrix {
    type Error = BwError;

    fn try_from(s: SymmetricMatrix) -> Result<Self> {
        PdMatrix::new(s)
    }
}

fn pd_threshold(lambda_max: f64) -> f64 {
    PD_TOLERANCE * lambda_max.max(1.0)
}

/// `S = Q diag(eigenvalues) Q^T` with eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `Q diag(f(lambda)) Q^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(l));
        }
        SymmetricMatrix::from_average(scaled * self.eigenvectors.transpose())
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.map(|l| l)
    }
}

pub fn eig_sym(s: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let eig = s
        .as_matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| BwError::Convergence(format!("symmetric eigensolver failed on a {0}x{0} matrix", s.dim())))?;
    let n = s.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(BwError::Convergence("non-finite eigenvalue".into()));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// What [`sqrt_psd`] does with slightly negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClampPolicy {
    /// Any negative eigenvalue is an error.
    Strict,
    /// Eigenvalues in `[-tol * lambda_max, 0)` are clamped to zero.
    Relative(f64),
}

impl Default for ClampPolicy {
    fn default() -> Self {
        ClampPolicy::Relative(NEG_EIG_TOLERANCE)
    }
}

/// Unique symmetric PSD square root.
pub fn sqrt_psd(s: &SymmetricMatrix, clamp: ClampPolicy) -> Result<SymmetricMatrix> {
    let eig = eig_sym(s)?;
    let threshold = match clamp {
        ClampPolicy::Strict => 0.0,
        ClampPolicy::Relative(tol) => -tol * eig.max_eigenvalue().max(0.0),
    };
    let lmin = eig.min_eigenvalue();
    if lmin < threshold {
        return Err(BwError::NotPsd {
            min_eigenvalue: lmin,
            threshold,
        });
    }
    Ok(eig.map(|l| l.max(0.0).sqrt()))
}

/// `P^{-1/2}` for positive-definite `P`.
pub fn inv_sqrt_pd(p: &PdMatrix) -> Result<SymmetricMatrix> {
    let eig = eig_sym(p)?;
    let threshold = pd_threshold(eig.max_eigenvalue());
    if !(eig.min_eigenvalue() > threshold) {
        return Err(BwError::NotPd {
            min_eigenvalue: eig.min_eigenvalue(),
            threshold,
        });
    }
    Ok(eig.map(|l| 1.0 / l.sqrt()))
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues set to zero).
pub fn project_psd(s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    Ok(eig_sym(s)?.map(|l| l.max(0.0)))
}

pub fn trace(s: &SymmetricMatrix) -> f64 {
    s.as_matrix().trace()
}

pub fn frobenius_norm(s: &SymmetricMatrix) -> f64 {
    s.as_matrix().norm()
}

/// True when every eigenvalue exceeds `tol`.
pub fn is_pd(s: &SymmetricMatrix, tol: f64) -> bool {
    eig_sym(s).map(|e| e.min_eigenvalue() > tol).unwrap_or(false)
}
