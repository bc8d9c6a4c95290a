//! Event-detector primitives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, Vector};

/// When the sensor transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerPolicy {
    /// Transmit whenever the trigger quadratic is non-negative.
    Event,
    /// As [`Event`](Self::Event), but only while `‖X‖ > ε`.
    #[default]
    EventFloor,
    /// Transmit at every grid point.
    Periodic,
}

impl TriggerPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            TriggerPolicy::Event => "event",
            TriggerPolicy::EventFloor => "event-floor",
            TriggerPolicy::Periodic => "periodic",
        }
    }
}

impl fmt::Display for TriggerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TriggerPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "event" => Ok(TriggerPolicy::Event),
            "event-floor" => Ok(TriggerPolicy::EventFloor),
            "periodic" => Ok(TriggerPolicy::Periodic),
            other => Err(format!("unknown trigger policy `{other}` (expected event, event-floor or periodic)")),
        }
    }
}

/// `ψ = [BK(x̂ - x̂_k); L(y - y_k)]`.
pub fn compute_psi(
    b: &Matrix,
    k: &Matrix,
    l: &Matrix,
    xhat: &Vector,
    xhat_k: &Vector,
    y: &Vector,
    y_k: &Vector,
) -> Vector {
    let n = b.nrows();
    let mut psi = Vector::zeros(2 * n);
    psi.rows_mut(0, n).copy_from(&(b * (k * (xhat - xhat_k))));
    psi.rows_mut(n, n).copy_from(&(l * (y - y_k)));
    psi
}

/// `[Xᵀ ψᵀ] Φ [X; ψ]`.
pub fn trigger_quadratic(x: &Vector, psi: &Vector, phi: &Matrix) -> f64 {
    let k = x.len();
    let mut z = Vector::zeros(2 * k);
    z.rows_mut(0, k).copy_from(x);
    z.rows_mut(k, k).copy_from(psi);
    z.dot(&(phi * &z))
}

/// Decision from an already evaluated quadratic and `‖X‖`.
pub fn fires(quadratic: f64, norm_x: f64, epsilon: f64, policy: TriggerPolicy) -> bool {
    match policy {
        TriggerPolicy::Periodic => true,
        TriggerPolicy::Event => quadratic >= 0.0,
        TriggerPolicy::EventFloor => quadratic >= 0.0 && norm_x > epsilon,
    }
}

pub fn should_trigger(x: &Vector, psi: &Vector, phi: &Matrix, epsilon: f64, policy: TriggerPolicy) -> bool {
    if policy == TriggerPolicy::Periodic {
        return true;
    }
    fires(trigger_quadratic(x, psi, phi), x.norm(), epsilon, policy)
}
