use rayon::prelude::*;
use serde::Serialize;

use super::{estimate_norm_integral, simulate, SimConfig, SimError};
use crate::design::{build_trigger_design, DesignError, GainSet};
use crate::model::LtiModel;
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub sigma: f64,
    pub epsilon: f64,
    pub packets: usize,
    pub min_interval: Option<f64>,
    pub last_event: f64,
    /// See [`estimate_norm_integral`].
    pub j_x: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("sigma = {sigma}, epsilon = {epsilon}: {source}")]
    Design { sigma: f64, epsilon: f64, source: DesignError },
    #[error("sigma = {sigma}, epsilon = {epsilon}: {source}")]
    Sim { sigma: f64, epsilon: f64, source: SimError },
}

/// Simulates every `(σ, ε)` pair in parallel. Results follow the order of
/// `params`.
pub fn sweep(
    model: &LtiModel,
    gains: &GainSet,
    q_tilde: Option<&Matrix>,
    params: &[(f64, f64)],
    config: &SimConfig,
) -> Result<Vec<SweepPoint>, SweepError> {
    params
        .par_iter()
        .map(|&(sigma, epsilon)| {
            let design = build_trigger_design(model, gains, q_tilde.cloned(), sigma, epsilon)
                .map_err(|source| SweepError::Design { sigma, epsilon, source })?;
            let trace =
                simulate(model, gains, &design, config).map_err(|source| SweepError::Sim { sigma, epsilon, source })?;
            Ok(SweepPoint {
                sigma,
                epsilon,
                packets: trace.events.packets(),
                min_interval: trace.events.min_interval(),
                last_event: trace.events.times.last().copied().unwrap_or(0.0),
                j_x: estimate_norm_integral(&trace),
            })
        })
        .collect()
}

/// Packet count for each `σ` at a fixed `ε`.
pub fn sigma_sweep(
    model: &LtiModel,
    gains: &GainSet,
    q_tilde: Option<&Matrix>,
    sigmas: &[f64],
    epsilon: f64,
    config: &SimConfig,
) -> Result<Vec<SweepPoint>, SweepError> {
    let params: Vec<_> = sigmas.iter().map(|&s| (s, epsilon)).collect();
    sweep(model, gains, q_tilde, &params, config)
}
