use super::{eigenvalues, ensure_finite, ensure_square, kron, symmetrize, Matrix, NumericsError, Result, Vector};

/// Solves `AᵀP + PA + Q = 0` for `P`.
///
/// The equation is vectorized as `(I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = -vec(Q)` and
/// solved with a dense LU factorization; an n×n problem becomes an n²×n²
/// linear system, which is fine for the state dimensions this crate targets.
///
/// `A` must be Hurwitz so that the solution exists and is unique.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    if q.shape() != (n, n) {
        return Err(NumericsError::DimensionMismatch(format!(
            "Q is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    ensure_finite(a)?;
    ensure_finite(q)?;
    let spectrum = eigenvalues(a)?;
    if !spectrum.is_hurwitz() {
        return Err(NumericsError::NotHurwitz { max_real_part: spectrum.max_real_part() });
    }

    let eye = Matrix::identity(n, n);
    let at = a.transpose();
    let op = kron(&eye, &at) + kron(&at, &eye);
    let rhs = -Vector::from_column_slice(q.as_slice());

    let lu = op.lu();
    let diag = lu.u().diagonal();
    let largest = diag.amax();
    let smallest = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if largest == 0.0 || smallest <= 1e-14 * largest {
        return Err(NumericsError::Singular);
    }
    let x = lu.solve(&rhs).ok_or(NumericsError::Singular)?;
    Ok(symmetrize(&Matrix::from_column_slice(n, n, x.as_slice())))
}

/// `‖AᵀP + PA + Q‖_F`.
pub fn lyapunov_residual(a: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    (a.transpose() * p + p * a + q).norm()
}
