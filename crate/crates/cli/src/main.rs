use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use etcontrol::sim::TriggerPolicy;
use etcontrol::sysid::EraConfig;
use etcontrol_cli::commands::{cmd_dataset, cmd_design, cmd_identify, cmd_scenarios, cmd_simulate, cmd_sweep};
use etcontrol_cli::{CliError, Context, Overrides, Scenario, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "etcontrol", version, about = "Observer-based event-triggered control: design, simulate, identify")]
struct Cli {
    /// Directory receiving all artifacts.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "etcontrol-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the bundled scenarios.
    Scenarios,
    /// Compute controller and observer gains.
    Design {
        /// Bundled scenario name or path to a scenario file.
        scenario: String,
    },
    /// Simulate the event-triggered closed loop.
    Simulate {
        scenario: String,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Simulate a grid of (sigma, epsilon) values.
    Sweep {
        scenario: String,
        /// Comma-separated sigma values.
        #[arg(long, value_delimiter = ',')]
        sigma: Vec<f64>,
        /// Comma-separated epsilon values.
        #[arg(long, value_delimiter = ',')]
        epsilon: Vec<f64>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Identify a state-space model from a `t,u,y` record with ERA.
    Identify {
        dataset: PathBuf,
        /// Hankel block count.
        #[arg(long, default_value_t = 20)]
        blocks: usize,
        /// Singular-value share kept by the order rule.
        #[arg(long, default_value_t = 0.99)]
        threshold: f64,
        /// Name of the emitted scenario.
        #[arg(long)]
        name: Option<String>,
    },
    /// Write a chirp record from a random stable system.
    Dataset {
        #[arg(long, default_value_t = 6)]
        order: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4000)]
        samples: usize,
        /// Sample rate in Hz.
        #[arg(long, default_value_t = 1000.0)]
        rate: f64,
    },
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["event", "event-floor", "periodic"]))]
    policy: Option<String>,
    /// Packet delay in seconds (a multiple of the step).
    #[arg(long)]
    delay: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
}

impl SimArgs {
    fn overrides(&self, sigma: Option<f64>, epsilon: Option<f64>) -> Overrides {
        Overrides {
            sigma,
            epsilon,
            policy: self.policy.as_deref().map(|p| p.parse::<TriggerPolicy>().expect("validated by clap")),
            delay: self.delay,
            horizon: self.horizon,
            step: self.step,
        }
    }
}

fn load(name: &str, overrides: &Overrides) -> Result<Scenario, CliError> {
    let mut s = Scenario::load(name)?;
    s.apply(overrides)?;
    Ok(s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::new(cli.out);
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Scenarios => cmd_scenarios(&mut out)?,
        Command::Design { scenario } => {
            cmd_design(&ctx, &load(&scenario, &Overrides::default())?, &mut out)?;
        }
        Command::Simulate { scenario, sigma, epsilon, sim } => {
            cmd_simulate(&ctx, &load(&scenario, &sim.overrides(sigma, epsilon))?, &mut out)?;
        }
        Command::Sweep { scenario, sigma, epsilon, sim } => {
            cmd_sweep(&ctx, &load(&scenario, &sim.overrides(None, None))?, &sigma, &epsilon, &mut out)?;
        }
        Command::Identify { dataset, blocks, threshold, name } => {
            let config = EraConfig { hankel_blocks: blocks, threshold, regularization: None };
            cmd_identify(&ctx, &dataset, &config, name.as_deref(), &mut out)?;
        }
        Command::Dataset { order, seed, samples, rate } => {
            cmd_dataset(&ctx, order, seed, samples, rate, &mut out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
