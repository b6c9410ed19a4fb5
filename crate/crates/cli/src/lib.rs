//! Library side of the `orchestra` binary: configuration and one function per
//! subcommand, so experiments can be driven from tests as well as the shell.

mod commands;
mod config;

use std::path::Path;

pub use commands::{
    benchmark, bind, build_strategies, cmd_evaluate, cmd_gridsearch, cmd_sensitivity, cmd_serve, cmd_train, default_weight_grid,
    load_checkpoint, parse_weight_grid, serve_on, BenchmarkRun, SensitivityOutcome, TrainOutcome,
};
pub use config::{Overrides, RunConfig, SNAPSHOT_FILE};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse: {0}")]
    Parse(String),
    #[error("core: {0}")]
    Core(#[from] orchestra::Error),
    #[error("serve: {0}")]
    Serve(#[from] hitl::HitlError),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// `error: <kind>: <message>` with no line breaks.
    pub fn one_line(&self) -> String {
        let text = format!("error: {self}");
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
