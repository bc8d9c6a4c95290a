//! Controller, observer and event-trigger design.
//!
//! The controller is an LQR state feedback `u = -Kx̂` and the state estimate
//! comes from a Luenberger observer with gain `L`, both obtained from
//! algebraic Riccati equations. With `X = [xᵀ eᵀ]ᵀ`, `e = x - x̂`, the
//! sampled closed loop reads `Ẋ = ÃX + ψ` where
//!
//! ```text
//! Ã = [ A-BK   BK  ]
//!     [  0    A-LC ]
//! ```
//!
//! is block upper triangular, so its spectrum is the union of the
//! controller and observer spectra. The trigger matrix
//! `Φ = [[(σ-1)Q̃, P̃], [P̃, 0]]` is built from the Lyapunov pair
//! `ÃᵀP̃ + P̃Ã + Q̃ = 0`.

use thiserror::Error;

use crate::model::LtiModel;
use crate::numerics::{
    self, eigenvalues, psd_sqrt, rank, solve_care, solve_lyapunov, symmetric_eigenvalues, Matrix, NumericsError,
    Spectrum,
};

/// Relative singular-value tolerance of the rank tests.
pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("(A, C) is not observable")]
    NotObservable,
    #[error("(A, Q^1/2) is not detectable and A is not Hurwitz")]
    NotDetectable,
    #[error("no stabilizing controller: {0}")]
    NotStabilizable(String),
    #[error("invalid weight `{name}`: {reason}")]
    Weight { name: &'static str, reason: String },
    #[error("invalid trigger parameter: {0}")]
    TriggerParameter(String),
    #[error(transparent)]
    Numerics(NumericsError),
}

impl From<NumericsError> for DesignError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::NotStabilizable(msg) => DesignError::NotStabilizable(msg),
            other => DesignError::Numerics(other),
        }
    }
}

/// Designer weights: `Q`, `R` for the regulator and `W`, `V` for the
/// observer Riccati equation.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignWeights {
    pub q: Matrix,
    pub r: Matrix,
    pub w: Matrix,
    pub v: Matrix,
}

impl DesignWeights {
    /// All four weights set to identity matrices.
    pub fn identity(model: &LtiModel) -> Self {
        let (n, m, p) = (model.states(), model.inputs(), model.outputs());
        Self {
            q: Matrix::identity(n, n),
            r: Matrix::identity(m, m),
            w: Matrix::identity(n, n),
            v: Matrix::identity(p, p),
        }
    }

    pub fn validate(&self, model: &LtiModel) -> Result<(), DesignError> {
        let (n, m, p) = (model.states(), model.inputs(), model.outputs());
        check_weight("Q", &self.q, n, false)?;
        check_weight("R", &self.r, m, true)?;
        check_weight("W", &self.w, n, false)?;
        check_weight("V", &self.v, p, true)?;
        Ok(())
    }
}

fn check_weight(name: &'static str, m: &Matrix, dim: usize, definite: bool) -> Result<(), DesignError> {
    let fail = |reason: String| Err(DesignError::Weight { name, reason });
    if m.shape() != (dim, dim) {
        return fail(format!("expected {dim}x{dim}, got {}x{}", m.nrows(), m.ncols()));
    }
    let asym = (m - m.transpose()).norm();
    if asym > 1e-12 * m.norm().max(1.0) {
        return fail("not symmetric".into());
    }
    let smallest = symmetric_eigenvalues(m).map_err(DesignError::Numerics)?[0];
    let floor = -1e-12 * m.norm().max(1.0);
    if definite && smallest <= 0.0 {
        return fail("not positive definite".into());
    }
    if !definite && smallest < floor {
        return fail("not positive semidefinite".into());
    }
    Ok(())
}

/// Controller and observer gains with the Riccati solutions behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    /// `m × n` state-feedback gain, `u = -Kx̂`.
    pub k: Matrix,
    /// `n × q` observer gain.
    pub l: Matrix,
    pub p_ctrl: Matrix,
    pub s_obs: Matrix,
}

impl GainSet {
    /// Spectrum of `A - BK`.
    pub fn controller_spectrum(&self, model: &LtiModel) -> Result<Spectrum, DesignError> {
        Ok(eigenvalues(&(model.a() - model.b() * &self.k))?)
    }

    /// Spectrum of `A - LC`.
    pub fn observer_spectrum(&self, model: &LtiModel) -> Result<Spectrum, DesignError> {
        Ok(eigenvalues(&(model.a() - &self.l * model.c()))?)
    }
}

/// Kalman rank test on `[B, AB, ..., A^{n-1}B]`, with `A` scaled to unit norm.
pub fn check_controllability(a: &Matrix, b: &Matrix) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    if a.ncols() != n || b.nrows() != n {
        return false;
    }
    let m = b.ncols();
    // Scaling A leaves the rank unchanged and keeps the Krylov blocks comparable.
    let scale = a.norm();
    let a = if scale > 0.0 { a / scale } else { a.clone() };
    let mut ctrb = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        ctrb.columns_mut(i * m, m).copy_from(&block);
        block = &a * block;
    }
    rank(&ctrb, RANK_TOLERANCE).map(|r| r == n).unwrap_or(false)
}

/// Observability as controllability of the dual pair `(Aᵀ, Cᵀ)`.
pub fn check_observability(a: &Matrix, c: &Matrix) -> bool {
    check_controllability(&a.transpose(), &c.transpose())
}

/// LQR gain `K = R⁻¹BᵀP` and the stabilizing CARE solution `P`.
pub fn lqr_gain(model: &LtiModel, weights: &DesignWeights) -> Result<(Matrix, Matrix), DesignError> {
    weights.validate(model)?;
    let (a, b) = (model.a(), model.b());
    if !model.is_hurwitz().map_err(model_err)? && !check_observability(a, &psd_sqrt(&weights.q)?) {
        return Err(DesignError::NotDetectable);
    }
    let p = solve_care(a, b, &weights.q, &weights.r)?;
    let r_inv = numerics::spd_inverse(&weights.r, "R")?;
    let k = r_inv * b.transpose() * &p;
    Ok((k, p))
}

/// Observer gain `L = SCᵀV⁻¹`, with `S` the stabilizing solution of
/// `AS + SAᵀ - SCᵀV⁻¹CS + W = 0` (the CARE of the dual pair).
pub fn observer_gain(model: &LtiModel, weights: &DesignWeights) -> Result<(Matrix, Matrix), DesignError> {
    weights.validate(model)?;
    let (a, c) = (model.a(), model.c());
    if !check_observability(a, c) {
        return Err(DesignError::NotObservable);
    }
    let s = solve_care(&a.transpose(), &c.transpose(), &weights.w, &weights.v)?;
    let v_inv = numerics::spd_inverse(&weights.v, "V")?;
    let l = &s * c.transpose() * v_inv;
    Ok((l, s))
}

fn model_err(e: crate::model::ModelError) -> DesignError {
    match e {
        crate::model::ModelError::Numerics(n) => n.into(),
        crate::model::ModelError::Dimension(d) => DesignError::Numerics(NumericsError::DimensionMismatch(d)),
    }
}

/// Gains plus the structural checks that accompany them.
#[derive(Debug, Clone)]
pub struct ControllerDesign {
    pub gains: GainSet,
    pub controllable: bool,
    pub observable: bool,
    /// Non-fatal findings, e.g. a failed detectability test on a Hurwitz plant.
    pub warnings: Vec<String>,
}

pub fn design_gains(model: &LtiModel, weights: &DesignWeights) -> Result<ControllerDesign, DesignError> {
    let mut warnings = Vec::new();
    let controllable = check_controllability(model.a(), model.b());
    let observable = check_observability(model.a(), model.c());
    if !controllable {
        warnings.push("(A, B) is not controllable".to_string());
    }
    if !check_observability(model.a(), &psd_sqrt(&weights.q)?) {
        warnings.push("(A, Q^1/2) fails the observability rank test".to_string());
    }
    let (k, p_ctrl) = lqr_gain(model, weights)?;
    let (l, s_obs) = observer_gain(model, weights)?;
    let gains = GainSet { k, l, p_ctrl, s_obs };
    if !gains.controller_spectrum(model)?.is_hurwitz() {
        return Err(DesignError::NotStabilizable("A - BK is not Hurwitz".into()));
    }
    if !gains.observer_spectrum(model)?.is_hurwitz() {
        return Err(DesignError::NotObservable);
    }
    Ok(ControllerDesign { gains, controllable, observable, warnings })
}

/// Event-trigger ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerDesign {
    /// `2n × 2n` closed-loop matrix acting on `X = [x; e]`.
    pub a_tilde: Matrix,
    /// Solution of `ÃᵀP̃ + P̃Ã + Q̃ = 0`.
    pub p_tilde: Matrix,
    pub q_tilde: Matrix,
    /// `4n × 4n` trigger matrix.
    pub phi: Matrix,
    /// Event-triggered factor in `(0, 1]`.
    pub sigma: f64,
    /// Norm floor below which no event is raised.
    pub epsilon: f64,
}

impl TriggerDesign {
    /// Number of plant states `n`.
    pub fn states(&self) -> usize {
        self.a_tilde.nrows() / 2
    }

    /// `√(λmax(P̃)/λmin(P̃)) · ε`, the radius `‖X‖` ultimately settles in.
    pub fn ultimate_bound(&self) -> f64 {
        match symmetric_eigenvalues(&self.p_tilde) {
            Ok(ev) => (ev[ev.len() - 1] / ev[0]).sqrt() * self.epsilon,
            Err(_) => f64::NAN,
        }
    }
}

/// `Ã = [[A-BK, BK], [0, A-LC]]`.
pub fn augmented_matrix(model: &LtiModel, gains: &GainSet) -> Matrix {
    let n = model.states();
    let bk = model.b() * &gains.k;
    let mut at = Matrix::zeros(2 * n, 2 * n);
    at.view_mut((0, 0), (n, n)).copy_from(&(model.a() - &bk));
    at.view_mut((0, n), (n, n)).copy_from(&bk);
    at.view_mut((n, n), (n, n)).copy_from(&(model.a() - &gains.l * model.c()));
    at
}

/// `Φ = [[(σ-1)Q̃, P̃], [P̃, 0]]`.
pub fn trigger_matrix(p_tilde: &Matrix, q_tilde: &Matrix, sigma: f64) -> Matrix {
    let k = p_tilde.nrows();
    let mut phi = Matrix::zeros(2 * k, 2 * k);
    phi.view_mut((0, 0), (k, k)).copy_from(&(q_tilde * (sigma - 1.0)));
    phi.view_mut((0, k), (k, k)).copy_from(p_tilde);
    phi.view_mut((k, 0), (k, k)).copy_from(p_tilde);
    phi
}

/// Assembles `Ã`, solves for `P̃` and builds `Φ`. `q_tilde` defaults to the
/// `2n × 2n` identity.
pub fn build_trigger_design(
    model: &LtiModel,
    gains: &GainSet,
    q_tilde: Option<Matrix>,
    sigma: f64,
    epsilon: f64,
) -> Result<TriggerDesign, DesignError> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(DesignError::TriggerParameter(format!("sigma = {sigma} is outside (0, 1]")));
    }
    if !(epsilon >= 0.0) {
        return Err(DesignError::TriggerParameter(format!("epsilon = {epsilon} must be non-negative")));
    }
    let n2 = 2 * model.states();
    let q_tilde = q_tilde.unwrap_or_else(|| Matrix::identity(n2, n2));
    check_weight("Q_tilde", &q_tilde, n2, true)?;
    let a_tilde = augmented_matrix(model, gains);
    let p_tilde = solve_lyapunov(&a_tilde, &q_tilde)?;
    let phi = trigger_matrix(&p_tilde, &q_tilde, sigma);
    Ok(TriggerDesign { a_tilde, p_tilde, q_tilde, phi, sigma, epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{lyapunov_residual, Vector};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn maglev() -> LtiModel {
        LtiModel::strictly_proper(
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 4.0, 0.0]),
            Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap()
    }

    fn maglev_weights() -> DesignWeights {
        DesignWeights {
            q: Matrix::identity(2, 2),
            r: Matrix::identity(1, 1),
            w: Matrix::identity(2, 2) * 100.0,
            v: Matrix::identity(1, 1) * 0.1,
        }
    }

    fn mass_spring() -> LtiModel {
        LtiModel::strictly_proper(
            Matrix::from_row_slice(
                4,
                4,
                &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -2.0, 1.0, -1.0, 0.0, 2.0, -2.0, 0.0, -2.0],
            ),
            Matrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 0.0]),
            Matrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]),
        )
        .unwrap()
    }

    fn assert_row(m: &Matrix, expected: &[f64], tol: f64) {
        let got: Vec<f64> = m.iter().copied().collect();
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() <= tol, "{got:?} vs {expected:?}");
        }
    }

    #[test]
    fn controllability_examples() {
        assert!(check_controllability(&Matrix::zeros(2, 2), &Matrix::identity(2, 2)));
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!(!check_controllability(&a, &Matrix::from_column_slice(2, 1, &[1.0, 0.0])));
    }

    #[test]
    fn observability_examples() {
        let m = maglev();
        assert!(check_observability(m.a(), &Matrix::identity(2, 2)));
        assert!(check_observability(m.a(), m.c()));
        assert!(!check_observability(&Matrix::identity(2, 2), &Matrix::from_row_slice(1, 2, &[1.0, 0.0])));
    }

    #[test]
    fn maglev_gains() {
        let (k, p) = lqr_gain(&maglev(), &maglev_weights()).unwrap();
        assert_row(&k, &[8.12, 4.15], 0.01);
        assert_eq!(p, p.transpose());
        let (l, _) = observer_gain(&maglev(), &maglev_weights()).unwrap();
        assert_row(&l, &[32.73, 35.87], 0.01);
    }

    #[test]
    fn mass_spring_gains() {
        let weights = DesignWeights::identity(&mass_spring());
        let (k, _) = lqr_gain(&mass_spring(), &weights).unwrap();
        assert_row(&k, &[0.46, 0.26, 0.71, 0.14], 0.01);
        let (l, _) = observer_gain(&mass_spring(), &weights).unwrap();
        assert_row(&l, &[0.80, 0.34, -0.17, 0.16], 0.01);
    }

    #[test]
    fn unobservable_output_rejected() {
        let m = LtiModel::strictly_proper(-Matrix::identity(2, 2), Matrix::identity(2, 1), Matrix::zeros(1, 2)).unwrap();
        let w = DesignWeights::identity(&m);
        assert_eq!(observer_gain(&m, &w).unwrap_err(), DesignError::NotObservable);
    }

    #[test]
    fn weight_validation() {
        let mut w = maglev_weights();
        w.r = Matrix::zeros(1, 1);
        assert!(matches!(lqr_gain(&maglev(), &w), Err(DesignError::Weight { name: "R", .. })));
        let mut w = maglev_weights();
        w.q = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(lqr_gain(&maglev(), &w), Err(DesignError::Weight { name: "Q", .. })));
    }

    #[test]
    fn undetectable_unstable_plant() {
        let mut w = maglev_weights();
        w.q = Matrix::zeros(2, 2);
        assert_eq!(lqr_gain(&maglev(), &w).unwrap_err(), DesignError::NotDetectable);
    }

    #[test]
    fn separation_of_spectra() {
        let d = design_gains(&maglev(), &maglev_weights()).unwrap();
        let at = augmented_matrix(&maglev(), &d.gains);
        let mut joint = eigenvalues(&at).unwrap().sorted();
        let mut parts = d.gains.controller_spectrum(&maglev()).unwrap().eigenvalues;
        parts.extend(d.gains.observer_spectrum(&maglev()).unwrap().eigenvalues);
        for p in parts {
            let idx = joint
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - p).norm().total_cmp(&(b.1 - p).norm()))
                .map(|(i, _)| i)
                .unwrap();
            let z: Complex64 = joint.remove(idx);
            assert!((z - p).norm() <= 1e-8 * (1.0 + p.norm()), "{z} vs {p}");
        }
    }

    #[test]
    fn heavier_input_cost_raises_trace() {
        let traces: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&s| {
                let mut w = maglev_weights();
                w.r = Matrix::identity(1, 1) * s;
                lqr_gain(&maglev(), &w).unwrap().1.trace()
            })
            .collect();
        assert!(traces.windows(2).all(|t| t[1] >= t[0]), "{traces:?}");
    }

    #[test]
    fn trigger_design_structure() {
        let d = design_gains(&maglev(), &maglev_weights()).unwrap();
        let td = build_trigger_design(&maglev(), &d.gains, None, 0.75, 0.01).unwrap();
        assert_eq!(td.phi.shape(), (8, 8));
        assert_eq!(td.phi, td.phi.transpose());
        assert!(lyapunov_residual(&td.a_tilde, &td.p_tilde, &td.q_tilde) <= 1e-8);
        assert!(symmetric_eigenvalues(&td.p_tilde).unwrap()[0] > 0.0);
        assert!(td.a_tilde.view((2, 0), (2, 2)).iter().all(|&v| v == 0.0));

        let unit = build_trigger_design(&maglev(), &d.gains, None, 1.0, 0.01).unwrap();
        assert!(unit.phi.view((0, 0), (4, 4)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trigger_parameters_validated() {
        let d = design_gains(&maglev(), &maglev_weights()).unwrap();
        for (s, e) in [(0.0, 0.1), (1.5, 0.1), (0.5, -1.0), (f64::NAN, 0.1)] {
            assert!(matches!(
                build_trigger_design(&maglev(), &d.gains, None, s, e),
                Err(DesignError::TriggerParameter(_))
            ));
        }
    }

    proptest! {
        #[test]
        fn phi_quadratic_matches_two_term_form(
            x in proptest::collection::vec(-2.0f64..2.0, 4),
            psi in proptest::collection::vec(-2.0f64..2.0, 4),
            sigma in 0.05f64..1.0,
        ) {
            let d = design_gains(&maglev(), &maglev_weights()).unwrap();
            let td = build_trigger_design(&maglev(), &d.gains, None, sigma, 0.0).unwrap();
            let x = Vector::from_vec(x);
            let psi = Vector::from_vec(psi);
            let mut z = Vector::zeros(8);
            z.rows_mut(0, 4).copy_from(&x);
            z.rows_mut(4, 4).copy_from(&psi);
            let full = (z.transpose() * &td.phi * &z)[0];
            let two = (sigma - 1.0) * (x.transpose() * &td.q_tilde * &x)[0] + 2.0 * (x.transpose() * &td.p_tilde * &psi)[0];
            prop_assert!((full - two).abs() <= 1e-10 * full.abs().max(1.0));
        }
    }
}
