//! Black-box identification with the eigensystem realization algorithm.
//!
//! The pipeline is
//!
//! 1. excite the plant with an exponential chirp ([`gen_chirp`]),
//! 2. recover the discrete impulse response by regularized spectral
//!    division ([`impulse_response`]),
//! 3. arrange the Markov parameters in a Hankel matrix and its one-step
//!    shift ([`build_hankel`], [`HankelPair`]),
//! 4. take the SVD and keep the leading singular values that carry the
//!    requested share of the total ([`select_order`]),
//! 5. realize `(A, B, C, D)` from the truncated factors ([`realize`]).
//!
//! Only single-input single-output data is supported. The realized model is
//! discrete-time at the data sample rate; [`IdentifiedModel::continuous`]
//! maps it to continuous time with the bilinear transform.

mod dataset;
pub mod synthetic;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LtiModel, ModelError};
use crate::numerics::{idft, real_dft, svd, Matrix, NumericsError};

pub use dataset::{DatasetError, EraDataset};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EraError {
    #[error("invalid chirp specification: {0}")]
    BadSpec(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("sequence too short: need {needed} samples, have {available}")]
    TooShort { needed: usize, available: usize },
    #[error("Hankel matrix is rank deficient at order {order} (sigma_r / sigma_1 = {ratio:e})")]
    RankDeficient { order: usize, ratio: f64 },
    #[error("input and output lengths differ ({input} vs {output})")]
    LengthMismatch { input: usize, output: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Exponential sine sweep from `f_start` to `f_end` over `samples` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpSpec {
    pub amplitude: f64,
    /// Hz.
    pub f_start: f64,
    /// Hz.
    pub f_end: f64,
    pub samples: usize,
    /// Hz.
    pub sample_rate: f64,
}

impl Default for ChirpSpec {
    fn default() -> Self {
        Self { amplitude: 0.05, f_start: 0.1, f_end: 100.0, samples: 8000, sample_rate: 1000.0 }
    }
}

impl ChirpSpec {
    /// Per-sample growth ratio `(f_end / f_start)^(1 / samples)`.
    pub fn ratio(&self) -> f64 {
        (self.f_end / self.f_start).powf(1.0 / self.samples as f64)
    }

    pub fn validate(&self) -> Result<(), EraError> {
        let bad = |m: &str| Err(EraError::BadSpec(m.to_string()));
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return bad("amplitude must be positive");
        }
        if !(self.f_start > 0.0 && self.f_start < self.f_end && self.f_end.is_finite()) {
            return bad("frequencies must satisfy 0 < f_start < f_end");
        }
        if self.samples < 2 {
            return bad("at least two samples are required");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample rate must be positive");
        }
        if self.ratio() <= 1.0 {
            return bad("frequency ratio per sample rounds to 1");
        }
        Ok(())
    }
}

/// `u(k) = α sin(2π f_s (r^k − 1) / ln r)` with `f_s` expressed in cycles
/// per sample, so the instantaneous frequency sweeps `f_s r^k`.
pub fn gen_chirp(spec: &ChirpSpec) -> Result<Vec<f64>, EraError> {
    spec.validate()?;
    let r = spec.ratio();
    let ln_r = r.ln();
    let f0 = spec.f_start / spec.sample_rate;
    Ok((0..spec.samples)
        .map(|k| {
            let phase = 2.0 * std::f64::consts::PI * f0 * (r.powi(k as i32) - 1.0) / ln_r;
            spec.amplitude * phase.sin()
        })
        .collect())
}

/// Default Tikhonov weight: `1e-10 · max|U(ω)|²`.
pub fn default_regularization(u: &[f64]) -> Result<f64, EraError> {
    let spectrum = real_dft(u)?;
    Ok(1e-10 * spectrum.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max))
}

/// Discrete impulse response from an input/output record:
/// `h = IDFT( Y·conj(U) / (|U|² + λ) )`.
///
/// The division is circular, so the record should end with enough quiet
/// input for the response to die out. `None` selects
/// [`default_regularization`].
pub fn impulse_response(u: &[f64], y: &[f64], regularization: Option<f64>) -> Result<Vec<f64>, EraError> {
    Ok(deconvolve(u, y, regularization)?.into_iter().map(|z| z.re).collect())
}

pub(crate) fn deconvolve(u: &[f64], y: &[f64], regularization: Option<f64>) -> Result<Vec<Complex64>, EraError> {
    if u.len() != y.len() {
        return Err(EraError::LengthMismatch { input: u.len(), output: y.len() });
    }
    if u.len() < 8 {
        return Err(EraError::TooShort { needed: 8, available: u.len() });
    }
    let big_u = real_dft(u)?;
    let big_y = real_dft(y)?;
    let peak = big_u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak < 1e-12 {
        return Err(EraError::DegenerateInput("input spectrum is identically zero".into()));
    }
    let lambda = regularization.unwrap_or(1e-10 * peak * peak);
    let ratio: Vec<Complex64> = big_u
        .iter()
        .zip(&big_y)
        .map(|(uw, yw)| {
            let denom = uw.norm_sqr() + lambda;
            if denom == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                yw * uw.conj() / denom
            }
        })
        .collect();
    Ok(idft(&ratio)?)
}

/// `(blocks+1) × (blocks+1)` Hankel matrix with entry `(i, j) = h[start + i + j]`.
pub fn build_hankel(h: &[f64], blocks: usize, start: usize) -> Result<Matrix, EraError> {
    let needed = start + 2 * blocks + 1;
    if h.len() < needed {
        return Err(EraError::TooShort { needed, available: h.len() });
    }
    let size = blocks + 1;
    Ok(Matrix::from_fn(size, size, |i, j| h[start + i + j]))
}

/// Hankel matrix of the Markov parameters `h[1..]` and its one-step shift.
#[derive(Debug, Clone)]
pub struct HankelPair {
    pub h0: Matrix,
    pub h1: Matrix,
    pub blocks: usize,
}

impl HankelPair {
    /// `h[0]` is the feedthrough; `h[k] = CA^{k-1}B` for `k ≥ 1`.
    pub fn from_impulse(h: &[f64], blocks: usize) -> Result<Self, EraError> {
        Ok(Self { h0: build_hankel(h, blocks, 1)?, h1: build_hankel(h, blocks, 2)?, blocks })
    }
}

/// Smallest `r` whose leading singular values hold at least `threshold` of
/// their total sum.
pub fn select_order(sigma: &[f64], threshold: f64) -> usize {
    let total: f64 = sigma.iter().sum();
    if sigma.is_empty() || total <= 0.0 {
        return 0;
    }
    let mut running = 0.0;
    for (i, s) in sigma.iter().enumerate() {
        running += s;
        if running / total >= threshold {
            return i + 1;
        }
    }
    sigma.len()
}

/// Share of the singular-value sum held by the first `order` values.
pub fn energy_fraction(sigma: &[f64], order: usize) -> f64 {
    let total: f64 = sigma.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    sigma.iter().take(order).sum::<f64>() / total
}

/// Order-`r` realization from the SVD `H0 = UΣVᵀ`:
///
/// ```text
/// A = Σr^{-1/2} Urᵀ H1 Vr Σr^{-1/2},  B = (Σr^{1/2} Vrᵀ)[:, 0],
/// C = (Ur Σr^{1/2})[0, :],            D = y0
/// ```
pub fn realize(h0: &Matrix, h1: &Matrix, order: usize, y0: f64) -> Result<LtiModel, EraError> {
    if h0.shape() != h1.shape() {
        return Err(ModelError::Dimension("H0 and H1 must have the same shape".into()).into());
    }
    let dec = svd(h0)?;
    if order == 0 || order > dec.sigma.len() {
        return Err(ModelError::Dimension(format!("order {order} outside 1..={}", dec.sigma.len())).into());
    }
    let ratio = dec.sigma[order - 1] / dec.sigma[0];
    if !(ratio > 1e-12) {
        return Err(EraError::RankDeficient { order, ratio });
    }
    let ur = dec.u.columns(0, order).into_owned();
    let vr = dec.v.columns(0, order).into_owned();
    let root: Vec<f64> = dec.sigma[..order].iter().map(|s| s.sqrt()).collect();
    let inv_root = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(order, root.iter().map(|s| 1.0 / s)));
    let root = Matrix::from_diagonal(&nalgebra::DVector::from_vec(root));

    let a = &inv_root * ur.transpose() * h1 * &vr * &inv_root;
    let b = (&root * vr.transpose()).columns(0, 1).into_owned();
    let c = (&ur * &root).rows(0, 1).into_owned();
    let d = Matrix::from_element(1, 1, y0);
    Ok(LtiModel::new(a, b, c, d)?)
}

/// `1 − ‖y_sim − y‖ / ‖y − mean(y)‖`, clipped to `[0, 1]`.
pub fn validate_model(model: &LtiModel, dataset: &EraDataset) -> Result<f64, EraError> {
    let simulated = model.simulate_discrete(dataset.input())?;
    let y = dataset.output();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    let miss = simulated.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if spread == 0.0 {
        return Ok(if miss == 0.0 { 1.0 } else { 0.0 });
    }
    Ok((1.0 - miss / spread).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EraConfig {
    /// Hankel matrices are `(hankel_blocks + 1)` square.
    pub hankel_blocks: usize,
    /// Singular-value share retained by the order rule.
    pub threshold: f64,
    /// Tikhonov weight for the deconvolution; `None` picks the default.
    pub regularization: Option<f64>,
}

impl Default for EraConfig {
    fn default() -> Self {
        Self { hankel_blocks: 20, threshold: 0.99, regularization: None }
    }
}

/// Result of [`identify`]. The model is discrete-time at `sample_rate`.
#[derive(Debug, Clone)]
pub struct IdentifiedModel {
    pub model: LtiModel,
    pub order: usize,
    pub energy_captured: f64,
    pub fit: f64,
    pub sample_rate: f64,
}

impl IdentifiedModel {
    /// Continuous-time equivalent by the bilinear transform.
    pub fn continuous(&self) -> Result<LtiModel, EraError> {
        Ok(self.model.tustin_to_continuous(1.0 / self.sample_rate)?)
    }
}

/// Everything computed along the identification pipeline.
#[derive(Debug, Clone)]
pub struct EraReport {
    pub impulse: Vec<f64>,
    pub hankel: HankelPair,
    pub singular_values: Vec<f64>,
    pub identified: IdentifiedModel,
}

pub fn identify(dataset: &EraDataset, config: &EraConfig) -> Result<EraReport, EraError> {
    if dataset.output().iter().all(|&v| v == 0.0) {
        return Err(EraError::DegenerateInput("output is identically zero".into()));
    }
    let impulse = impulse_response(dataset.input(), dataset.output(), config.regularization)?;
    let hankel = HankelPair::from_impulse(&impulse, config.hankel_blocks)?;
    let singular_values = svd(&hankel.h0)?.sigma;
    let order = select_order(&singular_values, config.threshold);
    let model = realize(&hankel.h0, &hankel.h1, order, impulse[0])?;
    let fit = validate_model(&model, dataset)?;
    let identified = IdentifiedModel {
        model,
        order,
        energy_captured: energy_fraction(&singular_values, order),
        fit,
        sample_rate: dataset.sample_rate(),
    };
    Ok(EraReport { impulse, hankel, singular_values, identified })
}

/// Imaginary residue left by [`impulse_response`], as `max|Im h| / ‖h‖`.
pub fn imaginary_residue(u: &[f64], y: &[f64], regularization: Option<f64>) -> Result<f64, EraError> {
    let h = deconvolve(u, y, regularization)?;
    let norm = h.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    let worst = h.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Ok(if norm == 0.0 { worst } else { worst / norm })
}
