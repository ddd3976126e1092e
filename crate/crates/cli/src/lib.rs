//! Command-line front end for the `qkdnet` cost models: configuration
//! parsing, the four subcommands and their report formats.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub use config::{Resolved, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// Process exit status. Usage errors (2) are reported by the argument parser.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Numerical(_) => 5,
            CliError::Validation(_) => 6,
        }
    }
}

impl From<qkdnet::Error> for CliError {
    fn from(e: qkdnet::Error) -> Self {
        match e {
            qkdnet::Error::NumericalFailure { .. } | qkdnet::Error::Range(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Infeasible(e.to_string()),
        }
    }
}
