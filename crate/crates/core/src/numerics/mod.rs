//! Dense linear algebra for the small matrices that show up in controller
//! and observer design (n up to roughly 16).
//!
//! Everything here is a pure function of its inputs. Solver outputs that are
//! mathematically symmetric (Lyapunov and Riccati solutions) are symmetrized
//! before they are returned, so callers may rely on `P == P.transpose()`
//! holding exactly.

mod fourier;
mod lyapunov;
mod riccati;
mod spectral;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

pub use fourier::{dft, idft, real_dft};
pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use riccati::{care_residual, solve_care, CARE_MAX_ITERATIONS, CARE_TOLERANCE};
pub use spectral::{eigenvalues, spectral_norm, svd, Spectrum, SvdResult};

/// Dense, heap-allocated real matrix.
pub type Matrix = DMatrix<f64>;
/// Dense, heap-allocated real column vector.
pub type Vector = DVector<f64>;

/// Iteration cap shared by the QR-type decompositions.
pub(crate) const DECOMPOSITION_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not Hurwitz: largest eigenvalue real part is {max_real_part}")]
    NotHurwitz { max_real_part: f64 },
    #[error("linear system is numerically singular")]
    Singular,
    #[error("no stabilizing Riccati solution: {0}")]
    NotStabilizable(String),
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),
    #[error("input contains non-finite entries")]
    NonFinite,
    #[error("input sequence is empty")]
    Empty,
}

pub type Result<T, E = NumericsError> = std::result::Result<T, E>;

pub(crate) fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(NumericsError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite)
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    ensure_square(m)?;
    ensure_finite(m)?;
    let eig = SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, DECOMPOSITION_MAX_ITERATIONS)
        .ok_or(NumericsError::NoConvergence {
            what: "symmetric eigendecomposition",
            iterations: DECOMPOSITION_MAX_ITERATIONS,
        })?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Square root of a symmetric positive semidefinite matrix. Small negative
/// eigenvalues produced by round-off are clamped to zero.
pub fn psd_sqrt(m: &Matrix) -> Result<Matrix> {
    ensure_square(m)?;
    ensure_finite(m)?;
    let eig = SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, DECOMPOSITION_MAX_ITERATIONS)
        .ok_or(NumericsError::NoConvergence {
            what: "symmetric eigendecomposition",
            iterations: DECOMPOSITION_MAX_ITERATIONS,
        })?;
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(symmetrize(&(v * Matrix::from_diagonal(&roots) * v.transpose())))
}

/// Numerical rank: number of singular values above `rel_tol * sigma_max`.
pub fn rank(m: &Matrix, rel_tol: f64) -> Result<usize> {
    if m.is_empty() {
        return Ok(0);
    }
    let s = svd(m)?;
    let top = s.sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.sigma.iter().filter(|&&v| v > rel_tol * top).count())
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &Matrix, what: &'static str) -> Result<Matrix> {
    ensure_square(m)?;
    let chol = nalgebra::Cholesky::new(symmetrize(m)).ok_or(NumericsError::NotPositiveDefinite(what))?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}
