use serde::Serialize;

use super::SimTrace;
use crate::design::{DesignWeights, TriggerDesign};
use crate::numerics::{spectral_norm, symmetric_eigenvalues, Matrix, Vector};

/// Lower bound on the inter-event time together with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauBound {
    pub tau: f64,
    /// `1 + ‖Ã‖`.
    pub alpha: f64,
    /// `β̂ / ε`.
    pub gamma: f64,
    /// `(1 - σ) λmin(Q̃) / (2‖P̃‖)`.
    pub theta_min: f64,
    pub beta_hat: f64,
    /// Set when the bound collapses to zero (`σ = 1` or `ε = 0`).
    pub degenerate: bool,
}

/// Time for `w = 1 + θ` to climb from 1 to `1 + θ_min` under `ẇ = γ + αw²`,
/// which no two consecutive events can beat:
///
/// `τ = [atan(√(α/γ)(1 + θ_min)) - atan(√(α/γ))] / √(αγ)`.
///
/// With `β̂ = 0` the `γ → 0` limit `θ_min / (α(1 + θ_min))` is returned.
pub fn analytic_tau(
    a_tilde: &Matrix,
    p_tilde: &Matrix,
    q_tilde: &Matrix,
    sigma: f64,
    epsilon: f64,
    beta_hat: f64,
) -> TauBound {
    let alpha = 1.0 + spectral_norm(a_tilde);
    let lambda_min = symmetric_eigenvalues(q_tilde).map(|ev| ev[0]).unwrap_or(f64::NAN);
    let theta_min = (1.0 - sigma) * lambda_min / (2.0 * spectral_norm(p_tilde));
    let gamma = if epsilon > 0.0 { beta_hat / epsilon } else { f64::INFINITY };
    let mut bound = TauBound { tau: 0.0, alpha, gamma, theta_min, beta_hat, degenerate: true };
    if !(theta_min > 0.0) || !gamma.is_finite() {
        return bound;
    }
    bound.degenerate = false;
    bound.tau = if gamma == 0.0 {
        theta_min / (alpha * (1.0 + theta_min))
    } else {
        let r = (alpha / gamma).sqrt();
        ((r * (1.0 + theta_min)).atan() - r.atan()) / (alpha * gamma).sqrt()
    };
    bound
}

/// Summary figures of a completed run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Transmitted packets `n_s`, including the one at `t = 0`.
    pub packets: usize,
    /// Packets a transmission at every grid point would need.
    pub baseline_steps: usize,
    /// `100 (1 - n_s / baseline_steps)`.
    pub reduction_pct: f64,
    /// Same, against the grid points up to and including the last event.
    pub transient_reduction_pct: f64,
    pub min_interval: Option<f64>,
    pub last_event: f64,
    /// `∫‖x̂‖dt` over `[5, 10]` s, or over the second half of shorter runs.
    pub j_x: f64,
    /// `∫ xᵀQx + uᵀRu dt` over the horizon.
    pub lqr_cost: f64,
    /// `√(λmax(P̃)/λmin(P̃)) ε`.
    pub ultimate_bound: f64,
    /// `sup ‖X‖` over the last tenth of the horizon.
    pub tail_norm_x: f64,
    pub tau: TauBound,
}

pub fn metrics(trace: &SimTrace, design: &TriggerDesign, weights: &DesignWeights) -> MetricsReport {
    let len = trace.len();
    let packets = trace.events.packets();
    let baseline_steps = len;
    let last_index = trace.events.indices.last().copied().unwrap_or(0);
    let step = trace.step();

    let j_x = estimate_norm_integral(trace);

    let stage = |i: usize| {
        let x = Vector::from_column_slice(trace.x(i));
        let u = Vector::from_column_slice(trace.u(i));
        x.dot(&(&weights.q * &x)) + u.dot(&(&weights.r * &u))
    };
    let lqr_cost = trapezoid(0, len - 1, step, stage);

    let tail_start = ((0.9 * (len - 1) as f64).ceil() as usize).min(len - 1);
    let tail_norm_x = trace.norm_x()[tail_start..].iter().copied().fold(0.0, f64::max);

    MetricsReport {
        packets,
        baseline_steps,
        reduction_pct: 100.0 * (1.0 - packets as f64 / baseline_steps as f64),
        transient_reduction_pct: 100.0 * (1.0 - packets as f64 / (last_index + 1) as f64),
        min_interval: trace.events.min_interval(),
        last_event: trace.events.times.last().copied().unwrap_or(0.0),
        j_x,
        lqr_cost,
        ultimate_bound: design.ultimate_bound(),
        tail_norm_x,
        tau: analytic_tau(
            &design.a_tilde,
            &design.p_tilde,
            &design.q_tilde,
            design.sigma,
            design.epsilon,
            trace.events.beta_hat,
        ),
    }
}

/// `∫‖x̂‖dt` over `[5, 10]` s, or over the second half when the run is
/// shorter than 10 s.
pub fn estimate_norm_integral(trace: &SimTrace) -> f64 {
    let len = trace.len();
    let step = trace.step();
    let end = trace.times().last().copied().unwrap_or(0.0);
    let (i0, i1) = if end >= 10.0 - 1e-9 {
        ((5.0 / step).round() as usize, (10.0 / step).round() as usize)
    } else {
        ((len - 1) / 2, len - 1)
    };
    let xhat_norm = |i: usize| trace.xhat(i).iter().map(|v| v * v).sum::<f64>().sqrt();
    trapezoid(i0, i1, step, xhat_norm)
}

fn trapezoid(i0: usize, i1: usize, step: f64, f: impl Fn(usize) -> f64) -> f64 {
    if i1 <= i0 {
        return 0.0;
    }
    let inner: f64 = (i0 + 1..i1).map(&f).sum();
    step * (inner + 0.5 * (f(i0) + f(i1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sigma_gives_zero_bound() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let b = analytic_tau(&a, &Matrix::identity(2, 2), &Matrix::identity(2, 2), 1.0, 0.1, 3.0);
        assert_eq!(b.tau, 0.0);
        assert!(b.degenerate);
    }

    #[test]
    fn bound_grows_as_beta_shrinks() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let eye = Matrix::identity(2, 2);
        let taus: Vec<f64> =
            [100.0, 10.0, 1.0, 0.0].iter().map(|&beta| analytic_tau(&a, &eye, &eye, 0.5, 0.1, beta).tau).collect();
        assert!(taus.windows(2).all(|w| w[1] > w[0]), "{taus:?}");
    }

    #[test]
    fn small_gamma_limit_is_continuous() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let eye = Matrix::identity(2, 2);
        let limit = analytic_tau(&a, &eye, &eye, 0.5, 0.1, 0.0).tau;
        let near = analytic_tau(&a, &eye, &eye, 0.5, 0.1, 1e-9).tau;
        assert!((limit - near).abs() <= 1e-6 * limit);
    }

    #[test]
    fn bound_matches_integrated_comparison_ode() {
        let (alpha, gamma, theta): (f64, f64, f64) = (3.0, 2.0, 0.4);
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![-(alpha - 1.0), -1.0]));
        let q = Matrix::identity(2, 2) * (2.0 * theta / 0.5);
        let b = analytic_tau(&a, &Matrix::identity(2, 2), &q, 0.5, 1.0, gamma);
        assert!((b.alpha - alpha).abs() < 1e-12 && (b.theta_min - theta).abs() < 1e-12);
        let f = |w: f64| gamma + alpha * w * w;
        let (mut w, mut t, h) = (1.0f64, 0.0f64, 1e-6);
        while w < 1.0 + theta {
            let k1 = f(w);
            let k2 = f(w + 0.5 * h * k1);
            let k3 = f(w + 0.5 * h * k2);
            let k4 = f(w + h * k3);
            w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        assert!((t - b.tau).abs() <= 2e-6, "{t} vs {}", b.tau);
    }

    #[test]
    fn trapezoid_of_linear_function_is_exact() {
        let v = trapezoid(0, 10, 0.1, |i| i as f64 * 0.1);
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(trapezoid(3, 3, 0.1, |_| 1.0), 0.0);
    }
}
