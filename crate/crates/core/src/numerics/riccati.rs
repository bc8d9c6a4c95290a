use super::{
    eigenvalues, ensure_finite, ensure_square, solve_lyapunov, spd_inverse, spectral_norm, symmetrize, Matrix,
    NumericsError, Result,
};

/// Newton iteration cap for [`solve_care`].
pub const CARE_MAX_ITERATIONS: usize = 100;
/// Convergence threshold on `‖P_{k+1} - P_k‖_F / max(1, ‖P_{k+1}‖_F)`.
pub const CARE_TOLERANCE: f64 = 1e-12;

/// Stabilizing solution of `AᵀP + PA - PBR⁻¹BᵀP + Q = 0`.
///
/// Kleinman's Newton iteration: starting from a stabilizing gain `K₀`, each
/// step solves the Lyapunov equation
///
/// ```text
/// (A - BKₖ)ᵀPₖ + Pₖ(A - BKₖ) + Q + KₖᵀRKₖ = 0,    Kₖ₊₁ = R⁻¹BᵀPₖ
/// ```
///
/// `K₀ = 0` when `A` is already Hurwitz. Otherwise `K₀ = BᵀZ⁻¹` where `Z`
/// solves `(A + βI)Z + Z(A + βI)ᵀ = 2BBᵀ` with `β > ‖A‖`, which places the
/// spectrum of `A - BK₀` on the line `Re s = -β`.
pub fn solve_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    let m = ensure_square(r)?;
    if b.shape() != (n, m) {
        return Err(NumericsError::DimensionMismatch(format!(
            "B is {}x{}, expected {n}x{m}",
            b.nrows(),
            b.ncols()
        )));
    }
    if q.shape() != (n, n) {
        return Err(NumericsError::DimensionMismatch(format!(
            "Q is {}x{}, expected {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    for mat in [a, b, q, r] {
        ensure_finite(mat)?;
    }
    let r_inv = spd_inverse(r, "R")?;
    let q = symmetrize(q);

    let mut gain = initial_gain(a, b)?;
    let mut previous: Option<Matrix> = None;
    for _ in 0..CARE_MAX_ITERATIONS {
        let closed = a - b * &gain;
        let weight = &q + gain.transpose() * r * &gain;
        let p = match solve_lyapunov(&closed, &weight) {
            Ok(p) => p,
            Err(NumericsError::NotHurwitz { max_real_part }) => {
                return Err(NumericsError::NotStabilizable(format!(
                    "Newton iterate lost stability (max real part {max_real_part})"
                )))
            }
            Err(e) => return Err(e),
        };
        gain = &r_inv * b.transpose() * &p;
        if let Some(prev) = &previous {
            if (&p - prev).norm() <= CARE_TOLERANCE * p.norm().max(1.0) {
                return finish(a, b, p, &gain);
            }
        }
        previous = Some(p);
    }
    Err(NumericsError::NoConvergence { what: "Kleinman-Newton iteration", iterations: CARE_MAX_ITERATIONS })
}

fn finish(a: &Matrix, b: &Matrix, p: Matrix, gain: &Matrix) -> Result<Matrix> {
    let spectrum = eigenvalues(&(a - b * gain))?;
    if !spectrum.is_hurwitz() {
        return Err(NumericsError::NotStabilizable(format!(
            "closed loop not Hurwitz (max real part {})",
            spectrum.max_real_part()
        )));
    }
    Ok(p)
}

// TODO: stabilizable-but-uncontrollable unstable pairs make Z singular here;
// restrict the shift construction to the controllable subspace to cover them.
fn initial_gain(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if eigenvalues(a)?.is_hurwitz() {
        return Ok(Matrix::zeros(b.ncols(), n));
    }
    let beta = 1.0 + spectral_norm(a);
    let shifted = -(a + Matrix::identity(n, n) * beta).transpose();
    let z = solve_lyapunov(&shifted, &(b * b.transpose() * 2.0))?;
    let z_inv = spd_inverse(&z, "controllability Gramian of the shifted pair")
        .map_err(|_| NumericsError::NotStabilizable("(A, B) is not controllable".into()))?;
    Ok(b.transpose() * z_inv)
}

/// `‖AᵀP + PA - PBR⁻¹BᵀP + Q‖_F`.
pub fn care_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> f64 {
    let r_inv = r.clone().try_inverse().unwrap_or_else(|| Matrix::from_element(r.nrows(), r.ncols(), f64::NAN));
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::symmetric_eigenvalues;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn relative_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> f64 {
        care_residual(a, b, q, r, p) / q.norm().max(1.0)
    }

    #[test]
    fn scalar_integrator() {
        let one = Matrix::identity(1, 1);
        let p = solve_care(&Matrix::zeros(1, 1), &one, &one, &one).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maglev_gain() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 4.0, 0.0]);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let q = Matrix::identity(2, 2);
        let r = Matrix::identity(1, 1);
        let p = solve_care(&a, &b, &q, &r).unwrap();
        let k = b.transpose() * &p;
        assert!((k[(0, 0)] - 8.12).abs() <= 0.01, "{k}");
        assert!((k[(0, 1)] - 4.15).abs() <= 0.01, "{k}");
        assert!(relative_residual(&a, &b, &q, &r, &p) <= 1e-8);
    }

    #[test]
    fn random_stabilizable_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..25 {
            let a = Matrix::from_fn(4, 4, |_, _| rng.gen_range(-2.0..2.0));
            let b = Matrix::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0));
            let q = Matrix::identity(4, 4);
            let r = Matrix::identity(2, 2);
            let p = solve_care(&a, &b, &q, &r).unwrap();
            assert!(relative_residual(&a, &b, &q, &r, &p) <= 1e-8);
            assert_eq!(p, p.transpose());
            assert!(symmetric_eigenvalues(&p).unwrap()[0] > 0.0);
            let k = b.transpose() * &p;
            assert!(eigenvalues(&(&a - &b * k)).unwrap().is_hurwitz());
        }
    }

    #[test]
    fn uncontrollable_unstable_mode() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let err = solve_care(&a, &b, &Matrix::identity(2, 2), &Matrix::identity(1, 1)).unwrap_err();
        assert!(matches!(err, NumericsError::NotStabilizable(_)), "{err:?}");
    }

    #[test]
    fn indefinite_r() {
        let err = solve_care(&-Matrix::identity(1, 1), &Matrix::identity(1, 1), &Matrix::identity(1, 1), &-Matrix::identity(1, 1))
            .unwrap_err();
        assert!(matches!(err, NumericsError::NotPositiveDefinite(_)));
    }

    #[test]
    fn dual_form_gives_filter_gain() {
        // Filter Riccati AS + SAᵀ - SCᵀV⁻¹CS + W = 0 is the CARE of (Aᵀ, Cᵀ).
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 4.0, 0.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let w = Matrix::identity(2, 2) * 100.0;
        let v = Matrix::identity(1, 1) * 0.1;
        let s = solve_care(&a.transpose(), &c.transpose(), &w, &v).unwrap();
        let filter = &a * &s + &s * a.transpose() - &s * c.transpose() * (1.0 / 0.1) * &c * &s + &w;
        assert!(filter.norm() / w.norm() <= 1e-8);
        let l = &s * c.transpose() * 10.0;
        assert!((l[(0, 0)] - 32.73).abs() <= 0.01 && (l[(1, 0)] - 35.87).abs() <= 0.01, "{l}");
    }
}
