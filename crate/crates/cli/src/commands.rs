//! Subcommand implementations. Each writes its artifacts below
//! `<out>/<scenario>/` and a human-readable summary to `w`.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use etcontrol::design::{build_trigger_design, design_gains, DesignWeights, TriggerDesign};
use etcontrol::numerics::Vector;
use etcontrol::sim::{self, metrics, simulate, write_events_csv, write_trace_csv, SimConfig, SweepPoint};
use etcontrol::sysid::synthetic::{chirp_experiment, random_stable_system, wideband_chirp, SystemFamily};
use etcontrol::sysid::{identify, EraConfig, EraDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::report::{fmt_num, render_metrics, GainSummary, IdentificationSummary, RunReport};
use crate::scenario::{bundled_names, ModelSource, Scenario};
use crate::CliError;

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into() }
    }

    fn dir_for(&self, name: &str) -> Result<PathBuf, CliError> {
        let dir = self.out_dir.join(name);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }
}

fn emit(w: &mut dyn Write, text: &str) -> Result<(), CliError> {
    w.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn finish(mut report: RunReport, started: Instant, dir: &Path) -> Result<RunReport, CliError> {
    report.elapsed_s = started.elapsed().as_secs_f64();
    let path = dir.join(format!("{}.json", report.command));
    report.artifact(&path);
    write_json(&path, &report)?;
    Ok(report)
}

pub fn cmd_scenarios(w: &mut dyn Write) -> Result<(), CliError> {
    for name in bundled_names() {
        let s = Scenario::load(name)?;
        emit(
            w,
            &format!(
                "{name:<12} n={} sigma={} epsilon={} T={} horizon={}  {}\n",
                s.model.states(),
                s.sigma,
                s.epsilon,
                s.sim.step,
                s.sim.horizon,
                s.description
            ),
        )?;
    }
    Ok(())
}

fn design_for(s: &Scenario) -> Result<(etcontrol::design::ControllerDesign, TriggerDesign), CliError> {
    let gains = design_gains(&s.model, &s.weights)?;
    let trigger = build_trigger_design(&s.model, &gains.gains, s.q_tilde.clone(), s.sigma, s.epsilon)?;
    Ok((gains, trigger))
}

/// Computes `K` and `L`, prints them with the closed-loop spectra and
/// writes `design.json`.
pub fn cmd_design(ctx: &Context, s: &Scenario, w: &mut dyn Write) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let dir = ctx.dir_for(&s.name)?;
    let (design, _) = design_for(s)?;
    let summary = GainSummary::new(&s.model, &s.weights, &design)?;
    emit(w, &format!("scenario {}\n", s.name))?;
    if let ModelSource::Identified { dataset, order, fit } = &s.source {
        emit(w, &format!("model identified from {} (order {order}, fit {fit:.4})\n", dataset.display()))?;
    }
    emit(w, &summary.render())?;
    let mut report = RunReport::new("design", &s.name);
    report.gains = Some(summary);
    finish(report, started, &dir)
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    scenario: crate::scenario::ScenarioFile,
    gains: &'a GainSummary,
    metrics: &'a etcontrol::sim::MetricsReport,
}

/// Runs the closed loop and writes `trace.csv`, `events.csv`,
/// `metrics.json` and `metrics.txt`.
pub fn cmd_simulate(ctx: &Context, s: &Scenario, w: &mut dyn Write) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let dir = ctx.dir_for(&s.name)?;
    let (design, trigger) = design_for(s)?;
    let trace = simulate(&s.model, &design.gains, &trigger, &s.sim)?;
    let m = metrics(&trace, &trigger, &s.weights);
    let summary = GainSummary::new(&s.model, &s.weights, &design)?;

    let mut report = RunReport::new("simulate", &s.name);
    let trace_path = dir.join("trace.csv");
    write_trace_csv(&trace, create(&trace_path)?).map_err(|e| CliError::io(&trace_path, e))?;
    report.artifact(&trace_path);
    let events_path = dir.join("events.csv");
    write_events_csv(&trace.events, create(&events_path)?).map_err(|e| CliError::io(&events_path, e))?;
    report.artifact(&events_path);
    let json_path = dir.join("metrics.json");
    write_json(&json_path, &MetricsFile { scenario: s.to_file(), gains: &summary, metrics: &m })?;
    report.artifact(&json_path);
    let text = render_metrics(&m);
    let text_path = dir.join("metrics.txt");
    fs::write(&text_path, &text).map_err(|e| CliError::io(&text_path, e))?;
    report.artifact(&text_path);

    emit(
        w,
        &format!(
            "scenario {} (sigma={}, epsilon={}, policy={}, T={}, horizon={}, delay={})\n",
            s.name, s.sigma, s.epsilon, s.sim.policy, s.sim.step, s.sim.horizon, s.sim.delay
        ),
    )?;
    emit(w, &text)?;
    report.metrics = Some(m);
    finish(report, started, &dir)
}

/// Simulates every `(σ, ε)` combination and writes `sweep.csv`. With an
/// empty list the scenario's own value is used.
pub fn cmd_sweep(
    ctx: &Context,
    s: &Scenario,
    sigmas: &[f64],
    epsilons: &[f64],
    w: &mut dyn Write,
) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let dir = ctx.dir_for(&s.name)?;
    let sigmas = if sigmas.is_empty() { vec![s.sigma] } else { sigmas.to_vec() };
    let epsilons = if epsilons.is_empty() { vec![s.epsilon] } else { epsilons.to_vec() };
    for &sigma in &sigmas {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(CliError::config("--sigma", format!("{sigma} is outside (0, 1]")));
        }
    }
    for &eps in &epsilons {
        if !(eps >= 0.0) {
            return Err(CliError::config("--epsilon", format!("{eps} must be non-negative")));
        }
    }
    let params: Vec<(f64, f64)> = epsilons.iter().flat_map(|&e| sigmas.iter().map(move |&s| (s, e))).collect();
    let gains = design_gains(&s.model, &s.weights)?.gains;
    let points = sim::sweep(&s.model, &gains, s.q_tilde.as_ref(), &params, &s.sim)?;

    let baseline = s.sim.steps()? + 1;
    let csv_path = dir.join("sweep.csv");
    write_sweep_csv(&points, baseline, create(&csv_path)?).map_err(|e| CliError::io(&csv_path, e))?;

    emit(w, &format!("scenario {} sweep ({} runs)\n", s.name, points.len()))?;
    emit(w, "sigma    epsilon  packets  reduction_pct  j_x        min_interval\n")?;
    for p in &points {
        emit(
            w,
            &format!(
                "{:<8} {:<8} {:<8} {:<14.2} {:<10} {}\n",
                p.sigma,
                p.epsilon,
                p.packets,
                reduction(p.packets, baseline),
                fmt_num(p.j_x),
                p.min_interval.map_or("n/a".into(), fmt_num)
            ),
        )?;
    }
    let mut report = RunReport::new("sweep", &s.name);
    report.artifact(&csv_path);
    report.sweep = Some(points);
    finish(report, started, &dir)
}

fn reduction(packets: usize, baseline: usize) -> f64 {
    100.0 * (1.0 - packets as f64 / baseline as f64)
}

fn write_sweep_csv(points: &[SweepPoint], baseline: usize, out: File) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "sigma,epsilon,packets,reduction_pct,j_x,min_interval,last_event")?;
    for p in points {
        let gap = p.min_interval.map_or(String::new(), |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.sigma,
            p.epsilon,
            p.packets,
            reduction(p.packets, baseline),
            p.j_x,
            gap,
            p.last_event
        )?;
    }
    out.flush()
}

/// Runs ERA on a `t,u,y` record. Writes the continuous-time model as a
/// scenario file plus the impulse response and Hankel singular values.
pub fn cmd_identify(
    ctx: &Context,
    dataset: &Path,
    config: &EraConfig,
    name: Option<&str>,
    w: &mut dyn Write,
) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let file = File::open(dataset).map_err(|e| CliError::io(dataset, e))?;
    let data = EraDataset::read_csv(file).map_err(|e| CliError::Config(format!("{}: {e}", dataset.display())))?;
    let era = identify(&data, config)?;
    let id = &era.identified;
    let continuous = id.continuous()?;

    let stem = dataset.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    let name = name.map_or_else(|| format!("{stem}-identified"), str::to_owned);
    let dir = ctx.dir_for(&name)?;
    let mut report = RunReport::new("identify", &name);

    let scenario = identified_scenario(&name, dataset, &continuous, data.sample_rate());
    let scenario_path = dir.join("identified.toml");
    let header = format!(
        "# Identified from {} by ERA (order {}, fit {:.6}).\n# Trigger and sim values are starting points; adjust before use.\n",
        dataset.display(),
        id.order,
        id.fit
    );
    fs::write(&scenario_path, header + &scenario.to_toml()).map_err(|e| CliError::io(&scenario_path, e))?;
    report.artifact(&scenario_path);

    let sv_path = dir.join("singular_values.csv");
    let total: f64 = era.singular_values.iter().sum();
    let mut text = String::from("index,sigma,cumulative_share\n");
    let mut acc = 0.0;
    for (i, s) in era.singular_values.iter().enumerate() {
        acc += s;
        text.push_str(&format!("{},{},{}\n", i + 1, s, acc / total));
    }
    fs::write(&sv_path, text).map_err(|e| CliError::io(&sv_path, e))?;
    report.artifact(&sv_path);

    let impulse_path = dir.join("impulse.csv");
    let mut text = String::from("k,h\n");
    for (k, h) in era.impulse.iter().enumerate() {
        text.push_str(&format!("{k},{h}\n"));
    }
    fs::write(&impulse_path, text).map_err(|e| CliError::io(&impulse_path, e))?;
    report.artifact(&impulse_path);

    let pole_list = |s: &etcontrol::numerics::Spectrum| s.sorted().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    let summary = IdentificationSummary {
        dataset: dataset.to_path_buf(),
        samples: data.len(),
        sample_rate: data.sample_rate(),
        order: id.order,
        energy_captured: id.energy_captured,
        fit: id.fit,
        discrete_poles: pole_list(&id.model.poles()?),
        continuous_poles: pole_list(&continuous.poles()?),
    };
    emit(
        w,
        &format!(
            "identified order {} (singular-value share {:.4}), fit {:.6}\nscenario written to {}\n",
            id.order,
            id.energy_captured,
            id.fit,
            scenario_path.display()
        ),
    )?;
    report.identification = Some(summary);
    finish(report, started, &dir)
}

fn identified_scenario(name: &str, dataset: &Path, model: &etcontrol::model::LtiModel, rate: f64) -> Scenario {
    let n = model.states();
    let fastest = model.poles().map(|p| p.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)).unwrap_or(1.0);
    // Explicit Euler wants T|λ| well below one; round down to a power of ten.
    let step = 10f64.powf((0.1 / fastest.max(1.0)).log10().floor()).min(1.0 / rate);
    let mut x0 = Vector::zeros(n);
    x0[0] = 1.0;
    Scenario {
        name: name.to_owned(),
        description: format!("ERA model of {}", dataset.display()),
        model: model.clone(),
        source: ModelSource::Literal,
        weights: DesignWeights::identity(model),
        sigma: 0.95,
        epsilon: 0.1,
        q_tilde: None,
        sim: SimConfig::new(step, 1.0, x0, Vector::zeros(n)),
    }
}

/// Writes a synthetic `t,u,y` record from a random stable system.
pub fn cmd_dataset(
    ctx: &Context,
    order: usize,
    seed: u64,
    samples: usize,
    sample_rate: f64,
    w: &mut dyn Write,
) -> Result<PathBuf, CliError> {
    if !(1..=12).contains(&order) {
        return Err(CliError::config("--order", format!("{order} is outside 1..=12")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = random_stable_system(order, &SystemFamily::default(), &mut rng);
    let data = chirp_experiment(&sys.model, &wideband_chirp(samples, sample_rate), samples / 4)?;
    let dir = ctx.dir_for("datasets")?;
    let path = dir.join(format!("chirp-order{order}-seed{seed}.csv"));
    data.write_csv(create(&path)?).map_err(|e| CliError::io(&path, e))?;
    let poles: Vec<String> = sys.poles.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
    emit(w, &format!("wrote {} ({} samples)\ntrue discrete poles: {}\n", path.display(), data.len(), poles.join(", ")))?;
    Ok(path)
}
