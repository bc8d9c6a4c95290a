//! State-space models `ẋ = Ax + Bu, y = Cx + Du` (or the discrete-time
//! analogue `x⁺ = Ax + Bu`).

use thiserror::Error;

use crate::numerics::{eigenvalues, Matrix, NumericsError, Spectrum, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{0}")]
    Dimension(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A linear time-invariant model with `n` states, `m` inputs and `q` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
}

impl LtiModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self, ModelError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(ModelError::Dimension(format!("A must be square, got {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(ModelError::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(ModelError::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.shape() != (c.nrows(), b.ncols()) {
            return Err(ModelError::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        if [&a, &b, &c, &d].iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(NumericsError::NonFinite.into());
        }
        Ok(Self { a, b, c, d })
    }

    /// Model with `D = 0`.
    pub fn strictly_proper(a: Matrix, b: Matrix, c: Matrix) -> Result<Self, ModelError> {
        let d = Matrix::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d(&self) -> &Matrix {
        &self.d
    }

    /// Number of states.
    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    /// Number of inputs.
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    /// Number of outputs.
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn poles(&self) -> Result<Spectrum, ModelError> {
        Ok(eigenvalues(&self.a)?)
    }

    /// Continuous-time asymptotic stability (A Hurwitz).
    pub fn is_hurwitz(&self) -> Result<bool, ModelError> {
        Ok(self.poles()?.is_hurwitz())
    }

    /// Discrete-time asymptotic stability (spectral radius below one).
    pub fn is_schur_stable(&self) -> Result<bool, ModelError> {
        Ok(self.poles()?.eigenvalues.iter().all(|z| z.norm() < 1.0))
    }

    /// Discrete-time Markov parameters `[D, CB, CAB, ..., CA^{count-2}B]` of
    /// a single-input single-output model.
    pub fn markov_parameters(&self, count: usize) -> Result<Vec<f64>, ModelError> {
        self.ensure_siso()?;
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return Ok(out);
        }
        out.push(self.d[(0, 0)]);
        let mut x = self.b.column(0).into_owned();
        for _ in 1..count {
            out.push((&self.c * &x)[0]);
            x = &self.a * x;
        }
        Ok(out)
    }

    /// Response of the discrete-time SISO model from a zero initial state.
    pub fn simulate_discrete(&self, u: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.ensure_siso()?;
        let mut x = Vector::zeros(self.states());
        let mut next = Vector::zeros(self.states());
        let b = self.b.column(0);
        let c = self.c.row(0);
        let d = self.d[(0, 0)];
        let mut y = Vec::with_capacity(u.len());
        for &uk in u {
            y.push(c.dot(&x.transpose()) + d * uk);
            next.gemv(1.0, &self.a, &x, 0.0);
            next.axpy(uk, &b, 1.0);
            std::mem::swap(&mut x, &mut next);
        }
        Ok(y)
    }

    /// Bilinear (Tustin) map of a continuous-time model to discrete time at
    /// sample period `dt`.
    pub fn tustin_discretize(&self, dt: f64) -> Result<Self, ModelError> {
        let n = self.states();
        let eye = Matrix::identity(n, n);
        let w = (&eye - &self.a * (dt / 2.0)).try_inverse().ok_or(NumericsError::Singular)?;
        let a = &w * (&eye + &self.a * (dt / 2.0));
        let b = &w * &self.b * dt;
        let c = &self.c * &w;
        let d = &self.d + &self.c * &w * &self.b * (dt / 2.0);
        Self::new(a, b, c, d)
    }

    /// Inverse of [`tustin_discretize`](Self::tustin_discretize): treats
    /// `self` as a discrete-time model sampled at `dt`.
    pub fn tustin_to_continuous(&self, dt: f64) -> Result<Self, ModelError> {
        let n = self.states();
        let eye = Matrix::identity(n, n);
        let m = (&self.a + &eye).try_inverse().ok_or(NumericsError::Singular)?;
        let a = &m * (&self.a - &eye) * (2.0 / dt);
        let b = &m * &self.b * (2.0 / dt);
        let c = &self.c * &m * 2.0;
        let d = &self.d - &self.c * &m * &self.b;
        Self::new(a, b, c, d)
    }

    fn ensure_siso(&self) -> Result<(), ModelError> {
        if self.inputs() != 1 || self.outputs() != 1 {
            return Err(ModelError::Dimension(format!(
                "single-input single-output model required, got {} inputs and {} outputs",
                self.inputs(),
                self.outputs()
            )));
        }
        Ok(())
    }
}
