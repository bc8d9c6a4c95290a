//! Run reports and their text/JSON renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use etcontrol::design::{augmented_matrix, ControllerDesign, DesignWeights};
use etcontrol::model::LtiModel;
use etcontrol::numerics::{care_residual, eigenvalues, Matrix, Spectrum};
use etcontrol::sim::{MetricsReport, SweepPoint};
use serde::Serialize;

use crate::CliError;

/// Eigenvalue as `[re, im]`.
pub type Pole = [f64; 2];

fn poles(s: &Spectrum) -> Vec<Pole> {
    s.sorted().iter().map(|z| [z.re, z.im]).collect()
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GainSummary {
    pub k: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
    pub controllable: bool,
    pub observable: bool,
    pub open_loop_poles: Vec<Pole>,
    pub controller_poles: Vec<Pole>,
    pub observer_poles: Vec<Pole>,
    /// Spectrum of the augmented `[x; e]` dynamics.
    pub closed_loop_poles: Vec<Pole>,
    pub care_residual: f64,
    pub observer_care_residual: f64,
    pub warnings: Vec<String>,
}

impl GainSummary {
    pub fn new(model: &LtiModel, weights: &DesignWeights, design: &ControllerDesign) -> Result<Self, CliError> {
        let g = &design.gains;
        let a = model.a();
        Ok(Self {
            k: rows(&g.k),
            l: rows(&g.l),
            controllable: design.controllable,
            observable: design.observable,
            open_loop_poles: poles(&model.poles()?),
            controller_poles: poles(&g.controller_spectrum(model)?),
            observer_poles: poles(&g.observer_spectrum(model)?),
            closed_loop_poles: poles(&eigenvalues(&augmented_matrix(model, g)).map_err(numerical)?),
            care_residual: care_residual(a, model.b(), &weights.q, &weights.r, &g.p_ctrl),
            observer_care_residual: care_residual(
                &a.transpose(),
                &model.c().transpose(),
                &weights.w,
                &weights.v,
                &g.s_obs,
            ),
            warnings: design.warnings.clone(),
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let flat = |m: &[Vec<f64>]| m.iter().flatten().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "K = [{}]", flat(&self.k));
        let _ = writeln!(s, "L = [{}]^T", flat(&self.l));
        let _ = writeln!(s, "controllable: {}", yes_no(self.controllable));
        let _ = writeln!(s, "observable:   {}", yes_no(self.observable));
        let _ = writeln!(s, "CARE residuals: controller {:.2e}, observer {:.2e}", self.care_residual, self.observer_care_residual);
        for (label, p) in [
            ("open-loop poles", &self.open_loop_poles),
            ("A - BK poles", &self.controller_poles),
            ("A - LC poles", &self.observer_poles),
            ("closed-loop poles", &self.closed_loop_poles),
        ] {
            let list: Vec<String> = p.iter().map(|&z| fmt_pole(z)).collect();
            let _ = writeln!(s, "{label}: {}", list.join(", "));
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Four significant figures, switching to exponent form for very small or
/// large magnitudes.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn fmt_pole([re, im]: Pole) -> String {
    if im == 0.0 {
        fmt_num(re)
    } else if im > 0.0 {
        format!("{}+{}i", fmt_num(re), fmt_num(im))
    } else {
        format!("{}-{}i", fmt_num(re), fmt_num(-im))
    }
}

/// Key-value text form of a metrics report.
pub fn render_metrics(m: &MetricsReport) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), fmt_num);
    let _ = writeln!(s, "packets = {}", m.packets);
    let _ = writeln!(s, "baseline_steps = {}", m.baseline_steps);
    let _ = writeln!(s, "reduction_pct = {:.2}", m.reduction_pct);
    let _ = writeln!(s, "transient_reduction_pct = {:.2}", m.transient_reduction_pct);
    let _ = writeln!(s, "min_interval = {}", opt(m.min_interval));
    let _ = writeln!(s, "last_event = {}", fmt_num(m.last_event));
    let _ = writeln!(s, "j_x = {}", fmt_num(m.j_x));
    let _ = writeln!(s, "lqr_cost = {}", fmt_num(m.lqr_cost));
    let _ = writeln!(s, "ultimate_bound = {}", fmt_num(m.ultimate_bound));
    let _ = writeln!(s, "tail_norm_x = {}", fmt_num(m.tail_norm_x));
    let _ = writeln!(s, "analytic_tau = {}", fmt_num(m.tau.tau));
    let _ = writeln!(s, "beta_hat = {}", fmt_num(m.tau.beta_hat));
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentificationSummary {
    pub dataset: PathBuf,
    pub samples: usize,
    pub sample_rate: f64,
    pub order: usize,
    pub energy_captured: f64,
    pub fit: f64,
    pub discrete_poles: Vec<Pole>,
    pub continuous_poles: Vec<Pole>,
}

/// Outcome of one command.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub artifacts: Vec<PathBuf>,
    pub elapsed_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identification: Option<IdentificationSummary>,
}

impl RunReport {
    pub fn new(command: &str, scenario: &str) -> Self {
        Self {
            command: command.into(),
            scenario: scenario.into(),
            artifacts: Vec::new(),
            elapsed_s: 0.0,
            gains: None,
            metrics: None,
            sweep: None,
            identification: None,
        }
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(8.12306), "8.1231");
        assert_eq!(fmt_num(-2.9e-5), "-2.900e-5");
        assert_eq!(fmt_num(0.0), "0.0000");
        assert_eq!(fmt_pole([-1.0, 2.0]), "-1.0000+2.0000i");
        assert_eq!(fmt_pole([-1.0, -2.0]), "-1.0000-2.0000i");
    }
}
