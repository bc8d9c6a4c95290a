//! Synthetic identification problems: random stable discrete-time SISO
//! systems and chirp-excited records generated from them.

use rand::Rng;

use super::{build_hankel, gen_chirp, ChirpSpec, EraDataset, EraError};
use crate::model::LtiModel;
use crate::numerics::{svd, Matrix};

/// Constraints on [`random_stable_system`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemFamily {
    /// Pole radii are drawn from this range.
    pub radius: (f64, f64),
    /// Minimum distance between any two poles.
    pub min_separation: f64,
    /// Every Hankel singular value must hold at least this share of the
    /// singular-value sum (computed on the exact Markov parameters).
    pub min_hankel_share: f64,
    /// Hankel size used for the share check.
    pub hankel_blocks: usize,
}

impl Default for SystemFamily {
    fn default() -> Self {
        Self { radius: (0.3, 0.9), min_separation: 0.15, min_hankel_share: 0.02, hankel_blocks: 20 }
    }
}

/// Discrete-time model together with the poles it was built from.
#[derive(Debug, Clone)]
pub struct SyntheticSystem {
    pub model: LtiModel,
    pub poles: Vec<num_complex::Complex64>,
}

/// Draws a random stable SISO system of the given order.
///
/// Poles are sampled in real/complex-pair form, assembled into a real modal
/// matrix and hidden behind a random similarity transform. Draws that fail
/// the separation or Hankel-share constraints are rejected and resampled.
pub fn random_stable_system<R: Rng + ?Sized>(order: usize, family: &SystemFamily, rng: &mut R) -> SyntheticSystem {
    assert!(order >= 1, "order must be positive");
    loop {
        let poles = draw_poles(order, family, rng);
        let separated = poles
            .iter()
            .enumerate()
            .all(|(i, p)| poles[..i].iter().all(|q| (p - q).norm() >= family.min_separation));
        if !separated {
            continue;
        }
        let modal = modal_matrix(&poles);
        let sign = |rng: &mut R| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let b = Matrix::from_fn(order, 1, |_, _| rng.gen_range(0.5..1.5) * sign(rng));
        let c = Matrix::from_fn(1, order, |_, _| rng.gen_range(0.5..1.5) * sign(rng));
        let s = Matrix::from_fn(order, order, |i, j| rng.gen_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 });
        let Some(s_inv) = s.clone().try_inverse() else { continue };
        let Ok(model) = LtiModel::strictly_proper(&s * modal * &s_inv, &s * b, c * s_inv) else { continue };
        if hankel_share(&model, family.hankel_blocks) >= family.min_hankel_share {
            return SyntheticSystem { model, poles };
        }
    }
}

fn draw_poles<R: Rng + ?Sized>(order: usize, family: &SystemFamily, rng: &mut R) -> Vec<num_complex::Complex64> {
    let mut poles = Vec::with_capacity(order);
    while poles.len() < order {
        let radius = rng.gen_range(family.radius.0..family.radius.1);
        if order - poles.len() >= 2 && rng.gen_bool(0.5) {
            let angle = rng.gen_range(0.2..2.5);
            let p = num_complex::Complex64::from_polar(radius, angle);
            poles.push(p);
            poles.push(p.conj());
        } else {
            let sign = if rng.gen_bool(0.3) { -1.0 } else { 1.0 };
            poles.push(num_complex::Complex64::new(sign * radius, 0.0));
        }
    }
    poles
}

fn modal_matrix(poles: &[num_complex::Complex64]) -> Matrix {
    let n = poles.len();
    let mut a = Matrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let p = poles[i];
        if p.im.abs() > 0.0 {
            a[(i, i)] = p.re;
            a[(i, i + 1)] = p.im;
            a[(i + 1, i)] = -p.im;
            a[(i + 1, i + 1)] = p.re;
            i += 2;
        } else {
            a[(i, i)] = p.re;
            i += 1;
        }
    }
    a
}

/// Smallest share of the Hankel singular-value sum among the first
/// `model.states()` values.
fn hankel_share(model: &LtiModel, blocks: usize) -> f64 {
    let Ok(h) = model.markov_parameters(2 * blocks + 2) else { return 0.0 };
    let Ok(hankel) = build_hankel(&h, blocks, 1) else { return 0.0 };
    let Ok(dec) = svd(&hankel) else { return 0.0 };
    let total: f64 = dec.sigma.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    dec.sigma[model.states() - 1] / total
}

/// Drives the discrete-time SISO `model` with the chirp followed by
/// `quiet_samples` of zero input and records the response.
pub fn chirp_experiment(model: &LtiModel, chirp: &ChirpSpec, quiet_samples: usize) -> Result<EraDataset, EraError> {
    let mut u = gen_chirp(chirp)?;
    u.resize(u.len() + quiet_samples, 0.0);
    let y = model.simulate_discrete(&u)?;
    EraDataset::new(u, y, chirp.sample_rate)
}

/// Chirp sweeping most of the band up to Nyquist, suited to noiseless
/// identification round trips.
pub fn wideband_chirp(samples: usize, sample_rate: f64) -> ChirpSpec {
    ChirpSpec { amplitude: 1.0, f_start: 1e-3 * sample_rate, f_end: 0.45 * sample_rate, samples, sample_rate }
}
