use nalgebra::{Schur, SVD};
use num_complex::Complex64;

use super::{ensure_finite, ensure_square, Matrix, NumericsError, Result, DECOMPOSITION_MAX_ITERATIONS};

/// Eigenvalues of a real square matrix.
///
/// Complex eigenvalues come in conjugate pairs. The order is unspecified;
/// use [`Spectrum::sorted`] when a canonical order is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest real part, or `-inf` for an empty spectrum.
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// All eigenvalues strictly in the open left half-plane.
    pub fn is_hurwitz(&self) -> bool {
        self.max_real_part() < 0.0
    }

    /// Sorted by real part, then imaginary part.
    pub fn sorted(&self) -> Vec<Complex64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

/// Singular value decomposition `M = U diag(sigma) Vᵀ` with `sigma`
/// sorted in descending order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let s = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.sigma));
        &self.u * s * self.v.transpose()
    }
}

pub fn eigenvalues(m: &Matrix) -> Result<Spectrum> {
    ensure_square(m)?;
    ensure_finite(m)?;
    if m.is_empty() {
        return Ok(Spectrum { eigenvalues: Vec::new() });
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, DECOMPOSITION_MAX_ITERATIONS).ok_or(
        NumericsError::NoConvergence { what: "Schur decomposition", iterations: DECOMPOSITION_MAX_ITERATIONS },
    )?;
    Ok(Spectrum { eigenvalues: schur.complex_eigenvalues().iter().copied().collect() })
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    ensure_finite(m)?;
    let raw = SVD::try_new(m.clone(), true, true, f64::EPSILON, DECOMPOSITION_MAX_ITERATIONS).ok_or(
        NumericsError::NoConvergence { what: "singular value decomposition", iterations: DECOMPOSITION_MAX_ITERATIONS },
    )?;
    let u = raw.u.expect("requested U");
    let v_t = raw.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..raw.singular_values.len()).collect();
    order.sort_by(|&i, &j| raw.singular_values[j].total_cmp(&raw.singular_values[i]));

    let sigma = order.iter().map(|&i| raw.singular_values[i].max(0.0)).collect();
    let u = Matrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = Matrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
    Ok(SvdResult { u, sigma, v })
}

/// Largest singular value (induced 2-norm).
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}
