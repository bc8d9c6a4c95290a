use super::*;
use crate::design::{build_trigger_design, design_gains, DesignWeights};
use crate::numerics::symmetric_eigenvalues;
use proptest::prelude::*;

fn maglev() -> (LtiModel, DesignWeights) {
    let model = LtiModel::strictly_proper(
        Matrix::from_row_slice(2, 2, &[0.0, 1.0, 4.0, 0.0]),
        Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
        Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )
    .unwrap();
    let weights = DesignWeights {
        q: Matrix::identity(2, 2),
        r: Matrix::identity(1, 1),
        w: Matrix::identity(2, 2) * 100.0,
        v: Matrix::identity(1, 1) * 0.1,
    };
    (model, weights)
}

struct Setup {
    model: LtiModel,
    weights: DesignWeights,
    gains: GainSet,
    design: TriggerDesign,
    config: SimConfig,
}

fn setup(sigma: f64, epsilon: f64, horizon: f64) -> Setup {
    let (model, weights) = maglev();
    let gains = design_gains(&model, &weights).unwrap().gains;
    let design = build_trigger_design(&model, &gains, None, sigma, epsilon).unwrap();
    let config = SimConfig::new(1e-4, horizon, Vector::from_vec(vec![-1.0, 0.0]), Vector::zeros(2));
    Setup { model, weights, gains, design, config }
}

impl Setup {
    fn run(&self) -> SimTrace {
        simulate(&self.model, &self.gains, &self.design, &self.config).unwrap()
    }
}

fn csv_bytes(trace: &SimTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf).unwrap();
    buf
}

#[test]
fn equilibrium_is_fixed() {
    let s = setup(0.5, 0.01, 1.0);
    let zero = Vector::zeros(2);
    let state = SimState::initial(&zero, &zero, &s.gains);
    let next = step(&state, &s.model, &s.gains, 1e-3).unwrap();
    assert_eq!(next.x, zero);
    assert_eq!(next.xhat, zero);
}

#[test]
fn single_step_by_hand() {
    let s = setup(0.75, 0.01, 1.0);
    let t = 1e-4;
    let state = SimState::initial(&s.config.x0, &s.config.xhat0, &s.gains);
    assert_eq!(state.u_held[0], 0.0);
    let next = step(&state, &s.model, &s.gains, t).unwrap();
    // ẋ = [x₂, 4x₁ + u] at x = [-1, 0], u = 0.
    assert_eq!(next.x.as_slice(), &[-1.0, -4.0 * t]);
    // The innovation L(y_k - Cx̂) = L·(-1) drives x̂ from 0.
    let (l1, l2) = (s.gains.l[0], s.gains.l[1]);
    assert!((next.xhat[0] + t * l1).abs() < 1e-15);
    assert!((next.xhat[1] + t * l2).abs() < 1e-15);
    assert_eq!(next.t, t);
}

#[test]
fn divergence_is_reported() {
    let s = setup(0.5, 0.01, 1.0);
    let mut gains = s.gains.clone();
    gains.k *= -50.0;
    let design = build_trigger_design(&s.model, &s.gains, None, 0.5, 0.01).unwrap();
    let mut config = s.config.clone();
    config.horizon = 200.0;
    config.step = 1e-3;
    assert!(matches!(simulate(&s.model, &gains, &design, &config), Err(SimError::Diverged { .. })));
}

#[test]
fn config_validation() {
    let s = setup(0.5, 0.01, 1.0);
    let mut bad = s.config.clone();
    bad.step = 0.0;
    assert!(matches!(bad.validate(2), Err(SimError::Config(_))));
    let mut bad = s.config.clone();
    bad.horizon = 5e-5;
    assert!(matches!(bad.validate(2), Err(SimError::Config(_))));
    let mut bad = s.config.clone();
    bad.delay = 1.5e-4;
    assert!(matches!(bad.validate(2), Err(SimError::Config(_))));
    let mut bad = s.config.clone();
    bad.x0 = Vector::zeros(3);
    assert!(matches!(bad.validate(2), Err(SimError::Dimension(_))));
    let mut ok = s.config.clone();
    ok.delay = 0.01;
    assert_eq!(ok.delay_steps().unwrap(), 100);
}

#[test]
fn trace_shape_and_event_log() {
    let s = setup(0.75, 0.01, 1.0);
    let trace = s.run();
    assert_eq!(trace.len(), 10_001);
    assert_eq!(trace.times()[0], 0.0);
    assert!((trace.times()[10_000] - 1.0).abs() < 1e-12);
    assert_eq!(trace.events.times[0], 0.0);
    assert!(trace.event_flags()[0]);
    assert!(trace.events.times.windows(2).all(|w| w[1] > w[0]));
    assert!(trace.events.min_interval().unwrap() >= 1e-4 * (1.0 - 1e-9));
    let flagged = trace.event_flags().iter().filter(|&&f| f).count();
    assert_eq!(flagged, trace.events.packets());
}

#[test]
fn huge_floor_leaves_only_the_initial_packet() {
    let s = setup(0.75, 1e6, 1.0);
    assert_eq!(s.run().events.packets(), 1);
}

#[test]
fn periodic_policy_sends_every_step() {
    let mut s = setup(0.75, 0.01, 0.5);
    s.config.policy = TriggerPolicy::Periodic;
    let trace = s.run();
    assert_eq!(trace.events.packets(), trace.len());
    assert_eq!(metrics(&trace, &s.design, &s.weights).reduction_pct, 0.0);
}

#[test]
fn zero_delay_is_identical_and_runs_are_deterministic() {
    let s = setup(0.5, 0.01, 2.0);
    let a = s.run();
    let mut delayed = s.config.clone();
    delayed.delay = 0.0;
    let b = simulate(&s.model, &s.gains, &s.design, &delayed).unwrap();
    assert_eq!(csv_bytes(&a), csv_bytes(&b));
    assert_eq!(a, s.run());
}

#[test]
fn hold_between_events() {
    let s = setup(0.5, 0.01, 3.0);
    let trace = s.run();
    for i in 1..trace.len() {
        if !trace.event_flags()[i] {
            assert_eq!(trace.u(i), trace.u(i - 1), "u changed without an event at {i}");
        } else {
            assert!(trace.quadform()[i] >= 0.0 && trace.norm_x()[i] > 0.01);
        }
    }
}

#[test]
fn delayed_packets_act_after_the_delay() {
    let mut s = setup(0.5, 0.01, 3.0);
    s.config.delay = 0.01;
    let trace = s.run();
    let arrivals: Vec<usize> = trace.events.indices.iter().skip(1).map(|i| i + 100).collect();
    for i in 1..trace.len() {
        if trace.u(i) != trace.u(i - 1) {
            assert!(arrivals.contains(&i), "u changed at {i} with no arrival");
        }
    }
    // Each arriving packet carries the estimate sent 100 steps earlier.
    for &k in trace.events.indices.iter().skip(1) {
        if k + 100 < trace.len() {
            let expected = -(&s.gains.k * Vector::from_column_slice(trace.xhat(k)));
            assert_eq!(trace.u(k + 100), expected.as_slice());
        }
    }
}

#[test]
fn quadform_matches_reconstructed_psi() {
    let s = setup(0.75, 0.01, 2.0);
    let trace = s.run();
    let (b, c) = (s.model.b(), s.model.c());
    let mut last = 0;
    for i in 1..trace.len() {
        let xk = Vector::from_column_slice(trace.x(last));
        let xhk = Vector::from_column_slice(trace.xhat(last));
        let x = Vector::from_column_slice(trace.x(i));
        let xh = Vector::from_column_slice(trace.xhat(i));
        let psi = compute_psi(b, &s.gains.k, &s.gains.l, &xh, &xhk, &(c * &x), &(c * &xk));
        let big_x = trace.augmented(i);
        let first = (s.design.sigma - 1.0) * big_x.dot(&(&s.design.q_tilde * &big_x));
        let second = 2.0 * big_x.dot(&(&s.design.p_tilde * &psi));
        let scale = first.abs() + second.abs() + 1e-300;
        assert!((trace.quadform()[i] - first - second).abs() <= 1e-9 * scale, "step {i}");
        if trace.event_flags()[i] {
            last = i;
        }
    }
}

#[test]
fn lyapunov_decrease_under_periodic_transmission() {
    let mut s = setup(0.75, 0.01, 2.0);
    s.config.policy = TriggerPolicy::Periodic;
    let trace = s.run();
    let t = trace.step();
    let d = &s.design;
    let curvature = symmetric_eigenvalues(&(d.a_tilde.transpose() * &d.p_tilde * &d.a_tilde)).unwrap();
    let gain = curvature[curvature.len() - 1].max(10.0);
    for i in 0..trace.len() - 1 {
        let (x0, x1) = (trace.augmented(i), trace.augmented(i + 1));
        let dv = (x1.dot(&(&d.p_tilde * &x1)) - x0.dot(&(&d.p_tilde * &x0))) / t;
        let bound = -d.sigma * x0.dot(&(&d.q_tilde * &x0)) + t * gain * x0.norm_squared();
        assert!(dv <= bound + 1e-12, "step {i}: {dv} > {bound}");
    }
}

/// RK4 of the continuous observer-based loop `ẋ = Ax - BKx̂`,
/// `x̂̇ = (A - BK)x̂ + LC(x - x̂)` up to `t_end`.
fn continuous_loop(s: &Setup, t_end: f64) -> Vector {
    let n = 2;
    let (a, b, c) = (s.model.a(), s.model.b(), s.model.c());
    let (k, l) = (&s.gains.k, &s.gains.l);
    let mut big = Matrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, n)).copy_from(&(-(b * k)));
    big.view_mut((n, 0), (n, n)).copy_from(&(l * c));
    big.view_mut((n, n), (n, n)).copy_from(&(a - b * k - l * c));
    let mut z = Vector::from_vec(vec![-1.0, 0.0, 0.0, 0.0]);
    let h = 1e-5;
    for _ in 0..(t_end / h).round() as usize {
        let k1 = &big * &z;
        let k2 = &big * (&z + &k1 * (h / 2.0));
        let k3 = &big * (&z + &k2 * (h / 2.0));
        let k4 = &big * (&z + &k3 * h);
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    z
}

#[test]
fn periodic_euler_converges_to_continuous_loop() {
    let mut s = setup(0.75, 0.01, 1.0);
    s.config.policy = TriggerPolicy::Periodic;
    let exact = continuous_loop(&s, 1.0);
    let errors: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
        .iter()
        .map(|&t| {
            s.config.step = t;
            let trace = s.run();
            let last = trace.len() - 1;
            let mut z = Vector::zeros(4);
            z.rows_mut(0, 2).copy_from_slice(trace.x(last));
            z.rows_mut(2, 2).copy_from_slice(trace.xhat(last));
            (z - &exact).norm()
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.4..0.6).contains(&ratio), "errors {errors:?}");
    }
}

#[test]
fn metrics_window_and_bounds() {
    let s = setup(0.75, 0.01, 4.0);
    let trace = s.run();
    let m = metrics(&trace, &s.design, &s.weights);
    assert_eq!(m.packets, trace.events.packets());
    assert_eq!(m.baseline_steps, 40_001);
    assert!((0.0..=100.0).contains(&m.reduction_pct));
    assert!(m.transient_reduction_pct <= m.reduction_pct);
    assert!(m.ultimate_bound.is_finite() && m.ultimate_bound > 0.01);
    assert!(m.lqr_cost > 0.0);
    assert!(m.tau.tau > 0.0 && m.tau.tau <= m.min_interval.unwrap());
    // Second-half window for a 4 s run.
    let direct: f64 = (20_000..40_000)
        .map(|i| {
            let n0 = Vector::from_column_slice(trace.xhat(i)).norm();
            let n1 = Vector::from_column_slice(trace.xhat(i + 1)).norm();
            0.5 * 1e-4 * (n0 + n1)
        })
        .sum();
    assert!((m.j_x - direct).abs() <= 1e-9 * direct.max(1e-12));
}

#[test]
fn sweep_preserves_order_and_matches_direct_runs() {
    let s = setup(0.5, 0.01, 2.0);
    let sigmas = [0.75, 0.25, 0.5];
    let points = sigma_sweep(&s.model, &s.gains, None, &sigmas, 0.01, &s.config).unwrap();
    assert_eq!(points.iter().map(|p| p.sigma).collect::<Vec<_>>(), sigmas);
    let single = sigma_sweep(&s.model, &s.gains, None, &[0.5], 0.01, &s.config).unwrap();
    assert_eq!(single[0].packets, s.run().events.packets());
    assert_eq!(single[0], points[2]);
}

#[test]
fn events_csv_layout() {
    let log = EventLog { times: vec![0.0, 0.5, 1.25], indices: vec![0, 5, 12], beta_hat: 0.0 };
    let mut buf = Vec::new();
    write_events_csv(&log, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "k,t_k,interval\n1,0,\n2,0.5,0.5\n3,1.25,0.75\n");
}

#[test]
fn trace_csv_header() {
    let s = setup(0.5, 0.01, 1e-3);
    let text = String::from_utf8(csv_bytes(&s.run())).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,xh1,xh2,u1,normX,quadform,event");
    assert_eq!(lines.count(), 11);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn events_respect_floor_and_grid(
        sigma in 0.1f64..0.95,
        eps in 0.005f64..0.1,
        x1 in -1.5f64..1.5,
        x2 in -1.0f64..1.0,
    ) {
        let mut s = setup(sigma, eps, 1.5);
        s.config.step = 1e-3;
        s.config.x0 = Vector::from_vec(vec![x1, x2]);
        let trace = s.run();
        for (i, &f) in trace.event_flags().iter().enumerate().skip(1) {
            if f {
                prop_assert!(trace.norm_x()[i] > eps && trace.quadform()[i] >= 0.0);
            }
        }
        prop_assert!(trace.events.min_interval().is_none_or(|m| m >= 1e-3 * (1.0 - 1e-9)));
    }
}
