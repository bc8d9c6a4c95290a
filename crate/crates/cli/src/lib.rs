//! Library side of the `etcontrol` command-line tool.
//!
//! Exit codes: 0 on success, 2 for configuration and parse errors, 3 for
//! numerical failures (no stabilizing gain, divergence, rank loss).

pub mod commands;
pub mod report;
pub mod scenario;

use std::path::PathBuf;

use etcontrol::design::DesignError;
use etcontrol::model::ModelError;
use etcontrol::sim::{SimError, SweepError};
use etcontrol::sysid::EraError;
use thiserror::Error;

pub use commands::Context;
pub use scenario::{Overrides, Scenario};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "ETCONTROL_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn config(field: &str, message: impl std::fmt::Display) -> Self {
        CliError::Config(format!("field `{field}`: {message}"))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::Weight { name, .. } => {
                let field = match name {
                    "Q_tilde" => "trigger.q_tilde".to_string(),
                    other => format!("weights.{}", other.to_lowercase()),
                };
                CliError::config(&field, e)
            }
            DesignError::TriggerParameter(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Diverged { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Design { source, .. } => source.into(),
            SweepError::Sim { source, .. } => source.into(),
        }
    }
}

impl From<EraError> for CliError {
    fn from(e: EraError) -> Self {
        match e {
            EraError::BadSpec(_)
            | EraError::DegenerateInput(_)
            | EraError::TooShort { .. }
            | EraError::LengthMismatch { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Dimension(_) => CliError::Config(e.to_string()),
            ModelError::Numerics(_) => CliError::Numerical(e.to_string()),
        }
    }
}
