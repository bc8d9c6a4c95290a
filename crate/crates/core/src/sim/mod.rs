//! Fixed-step simulation of the observer-based event-triggered loop.
//!
//! The plant and the estimator are integrated with explicit Euler on a
//! uniform grid. After each step the event detector compares the current
//! `X = [x; e]` and `ψ` against the trigger matrix; on an event the sensor
//! sends `(x, x̂)` and, once the packet arrives, the held control becomes
//! `-Kx̂(t_k)` and the observer innovation switches to `y(t_k)`.

mod metrics;
mod output;
mod sweep;
mod trigger;

use std::collections::VecDeque;

use thiserror::Error;

use crate::design::{GainSet, TriggerDesign};
use crate::model::LtiModel;
use crate::numerics::{Matrix, Vector};

pub use metrics::{analytic_tau, estimate_norm_integral, metrics, MetricsReport, TauBound};
pub use output::{write_events_csv, write_trace_csv};
pub use sweep::{sigma_sweep, sweep, SweepError, SweepPoint};
pub use trigger::{compute_psi, fires, should_trigger, trigger_quadratic, TriggerPolicy};

/// Runs are aborted once `‖x‖` exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state diverged at t = {t} s (|x| = {norm:e})")]
    Diverged { t: f64, norm: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Euler step `T` in seconds.
    pub step: f64,
    pub horizon: f64,
    pub x0: Vector,
    pub xhat0: Vector,
    pub policy: TriggerPolicy,
    /// Transport delay of every packet, a multiple of `step`.
    pub delay: f64,
}

impl SimConfig {
    pub fn new(step: f64, horizon: f64, x0: Vector, xhat0: Vector) -> Self {
        Self { step, horizon, x0, xhat0, policy: TriggerPolicy::EventFloor, delay: 0.0 }
    }

    /// Number of Euler steps; the trace has one more record.
    pub fn steps(&self) -> Result<usize, SimError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(SimError::Config(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon >= self.step && self.horizon.is_finite()) {
            return Err(SimError::Config(format!("horizon {} is shorter than the step {}", self.horizon, self.step)));
        }
        grid_count(self.horizon, self.step, "horizon")
    }

    /// Delay in whole steps.
    pub fn delay_steps(&self) -> Result<usize, SimError> {
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(SimError::Config(format!("delay must be non-negative, got {}", self.delay)));
        }
        if self.delay == 0.0 {
            return Ok(0);
        }
        grid_count(self.delay, self.step, "delay")
    }

    pub fn validate(&self, states: usize) -> Result<(), SimError> {
        self.steps()?;
        self.delay_steps()?;
        for (name, v) in [("x0", &self.x0), ("xhat0", &self.xhat0)] {
            if v.len() != states {
                return Err(SimError::Dimension(format!("{name} has {} entries, expected {states}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(SimError::Config(format!("{name} is not finite")));
            }
        }
        Ok(())
    }
}

fn grid_count(span: f64, step: f64, what: &str) -> Result<usize, SimError> {
    let ratio = span / step;
    let count = ratio.round();
    if (ratio - count).abs() > 1e-6 * ratio.max(1.0) {
        return Err(SimError::Config(format!("{what} {span} is not a multiple of the step {step}")));
    }
    Ok(count as usize)
}

/// Loop state between grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub x: Vector,
    pub xhat: Vector,
    /// Plant state at the last applied event; `y(t_k) = Cx_k`.
    pub x_k: Vector,
    pub xhat_k: Vector,
    /// Zero-order-held control `-Kx̂_k`.
    pub u_held: Vector,
}

impl SimState {
    /// State right after the unconditional transmission at `t = 0`.
    pub fn initial(x0: &Vector, xhat0: &Vector, gains: &GainSet) -> Self {
        Self {
            t: 0.0,
            x: x0.clone(),
            xhat: xhat0.clone(),
            x_k: x0.clone(),
            xhat_k: xhat0.clone(),
            u_held: -(&gains.k * xhat0),
        }
    }

    /// Applies a delivered packet.
    pub fn apply_event(&mut self, x: &Vector, xhat: &Vector, gains: &GainSet) {
        self.x_k.copy_from(x);
        self.xhat_k.copy_from(xhat);
        self.u_held = -(&gains.k * xhat);
    }
}

/// Matrices used by every Euler step.
struct Dynamics<'a> {
    a: &'a Matrix,
    b: &'a Matrix,
    lc: Matrix,
}

impl<'a> Dynamics<'a> {
    fn new(model: &'a LtiModel, gains: &GainSet) -> Self {
        Self { a: model.a(), b: model.b(), lc: &gains.l * model.c() }
    }

    fn advance(&self, s: &mut SimState, step: f64, dx: &mut Vector, innov: &mut Vector) -> Result<(), SimError> {
        dx.gemv(1.0, self.a, &s.x, 0.0);
        dx.gemv(1.0, self.b, &s.u_held, 1.0);
        s.x.axpy(step, dx, 1.0);

        innov.copy_from(&s.x_k);
        *innov -= &s.xhat;
        dx.gemv(1.0, self.a, &s.xhat, 0.0);
        dx.gemv(1.0, self.b, &s.u_held, 1.0);
        dx.gemv(1.0, &self.lc, innov, 1.0);
        s.xhat.axpy(step, dx, 1.0);

        s.t += step;
        let norm = s.x.norm();
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err(SimError::Diverged { t: s.t, norm });
        }
        Ok(())
    }
}

/// One explicit-Euler step of plant and estimator under the held snapshots.
pub fn step(state: &SimState, model: &LtiModel, gains: &GainSet, step: f64) -> Result<SimState, SimError> {
    let mut next = state.clone();
    let n = model.states();
    Dynamics::new(model, gains).advance(&mut next, step, &mut Vector::zeros(n), &mut Vector::zeros(n))?;
    Ok(next)
}

/// Transmission record.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    /// Trigger instants, ascending, starting at 0.
    pub times: Vec<f64>,
    /// Grid index of each trigger instant.
    pub indices: Vec<usize>,
    /// Largest `‖ψ(t_{i+1}) - ψ(t_i)‖ / T` seen within inter-event intervals.
    pub beta_hat: f64,
}

impl EventLog {
    pub fn packets(&self) -> usize {
        self.times.len()
    }

    /// Gaps between consecutive events.
    pub fn intervals(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Smallest gap, `None` with fewer than two events.
    pub fn min_interval(&self) -> Option<f64> {
        self.intervals().into_iter().reduce(f64::min)
    }
}

/// Per-grid-point record of a run, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    states: usize,
    inputs: usize,
    step: f64,
    t: Vec<f64>,
    x: Vec<f64>,
    xhat: Vec<f64>,
    u: Vec<f64>,
    norm_x: Vec<f64>,
    quadform: Vec<f64>,
    event: Vec<bool>,
    pub events: EventLog,
}

impl SimTrace {
    fn with_capacity(states: usize, inputs: usize, step: f64, records: usize) -> Self {
        Self {
            states,
            inputs,
            step,
            t: Vec::with_capacity(records),
            x: Vec::with_capacity(records * states),
            xhat: Vec::with_capacity(records * states),
            u: Vec::with_capacity(records * inputs),
            norm_x: Vec::with_capacity(records),
            quadform: Vec::with_capacity(records),
            event: Vec::with_capacity(records),
            events: EventLog { times: Vec::new(), indices: Vec::new(), beta_hat: 0.0 },
        }
    }

    fn push(&mut self, t: f64, s: &SimState, norm_x: f64, quadform: f64, event: bool) {
        self.t.push(t);
        self.x.extend(s.x.iter());
        self.xhat.extend(s.xhat.iter());
        self.u.extend(s.u_held.iter());
        self.norm_x.push(norm_x);
        self.quadform.push(quadform);
        self.event.push(event);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
    pub fn states(&self) -> usize {
        self.states
    }
    pub fn inputs(&self) -> usize {
        self.inputs
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn times(&self) -> &[f64] {
        &self.t
    }
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.states..(i + 1) * self.states]
    }
    pub fn xhat(&self, i: usize) -> &[f64] {
        &self.xhat[i * self.states..(i + 1) * self.states]
    }
    /// Estimation error `x - x̂`.
    pub fn error(&self, i: usize) -> Vector {
        Vector::from_iterator(self.states, self.x(i).iter().zip(self.xhat(i)).map(|(a, b)| a - b))
    }
    /// Stacked `X = [x; x - x̂]`.
    pub fn augmented(&self, i: usize) -> Vector {
        let n = self.states;
        let mut out = Vector::zeros(2 * n);
        out.rows_mut(0, n).copy_from_slice(self.x(i));
        out.rows_mut(n, n).copy_from(&self.error(i));
        out
    }
    pub fn u(&self, i: usize) -> &[f64] {
        &self.u[i * self.inputs..(i + 1) * self.inputs]
    }
    pub fn norm_x(&self) -> &[f64] {
        &self.norm_x
    }
    pub fn quadform(&self) -> &[f64] {
        &self.quadform
    }
    pub fn event_flags(&self) -> &[bool] {
        &self.event
    }
}

/// Runs the closed loop over the configured horizon.
pub fn simulate(
    model: &LtiModel,
    gains: &GainSet,
    design: &TriggerDesign,
    config: &SimConfig,
) -> Result<SimTrace, SimError> {
    let n = model.states();
    config.validate(n)?;
    if design.states() != n || gains.k.ncols() != n || gains.l.nrows() != n {
        return Err(SimError::Dimension(format!("design and gains do not match a {n}-state model")));
    }
    let steps = config.steps()?;
    let delay = config.delay_steps()?;
    let (t_step, policy) = (config.step, config.policy);

    let dynamics = Dynamics::new(model, gains);
    let bk = model.b() * &gains.k;
    let mut state = SimState::initial(&config.x0, &config.xhat0, gains);
    // Snapshot held by the sensor, which is what ψ measures against.
    let mut sent_x = config.x0.clone();
    let mut sent_xhat = config.xhat0.clone();
    let mut pending: VecDeque<(usize, Vector, Vector)> = VecDeque::new();

    let mut dx = Vector::zeros(n);
    let mut innov = Vector::zeros(n);
    let mut diff = Vector::zeros(n);
    let mut z = Vector::zeros(4 * n);
    let mut phi_z = Vector::zeros(4 * n);
    let mut psi_prev = Vector::zeros(2 * n);

    let mut trace = SimTrace::with_capacity(n, model.inputs(), t_step, steps + 1);
    let evaluate = |state: &SimState, sent_x: &Vector, sent_xhat: &Vector, z: &mut Vector, phi_z: &mut Vector, diff: &mut Vector| {
        z.rows_mut(0, n).copy_from(&state.x);
        diff.copy_from(&state.x);
        *diff -= &state.xhat;
        z.rows_mut(n, n).copy_from(diff);
        diff.copy_from(&state.xhat);
        *diff -= sent_xhat;
        z.rows_mut(2 * n, n).copy_from(&(&bk * &*diff));
        diff.copy_from(&state.x);
        *diff -= sent_x;
        z.rows_mut(3 * n, n).copy_from(&(&dynamics.lc * &*diff));
        phi_z.gemv(1.0, &design.phi, z, 0.0);
        (z.rows(0, 2 * n).norm(), z.dot(phi_z))
    };

    let (norm0, quad0) = evaluate(&state, &sent_x, &sent_xhat, &mut z, &mut phi_z, &mut diff);
    trace.push(0.0, &state, norm0, quad0, true);
    trace.events.times.push(0.0);
    trace.events.indices.push(0);
    let mut beta_hat = 0.0f64;

    for i in 1..=steps {
        dynamics.advance(&mut state, t_step, &mut dx, &mut innov)?;
        let t = i as f64 * t_step;
        state.t = t;
        let (norm_x, quad) = evaluate(&state, &sent_x, &sent_xhat, &mut z, &mut phi_z, &mut diff);

        let psi = z.rows(2 * n, 2 * n);
        beta_hat = beta_hat.max((psi - &psi_prev).norm() / t_step);
        let fired = fires(quad, norm_x, design.epsilon, policy);
        if fired {
            sent_x.copy_from(&state.x);
            sent_xhat.copy_from(&state.xhat);
            pending.push_back((i + delay, state.x.clone(), state.xhat.clone()));
            psi_prev.fill(0.0);
            trace.events.times.push(t);
            trace.events.indices.push(i);
        } else {
            psi_prev.copy_from(&psi);
        }
        while pending.front().is_some_and(|(due, _, _)| *due <= i) {
            let (_, px, pxhat) = pending.pop_front().expect("front checked");
            state.apply_event(&px, &pxhat, gains);
        }
        trace.push(t, &state, norm_x, quad, fired);
    }
    trace.events.beta_hat = beta_hat;
    Ok(trace)
}

#[cfg(test)]
mod tests;
