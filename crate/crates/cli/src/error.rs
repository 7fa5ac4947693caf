use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error(transparent)]
    Solver(#[from] chemo4d::Error),

    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Solver(_) => "solver",
            CliError::Output(_) => "output",
        }
    }

    pub fn record(&self, experiment: Option<&str>, config_hash: Option<&str>) -> ErrorRecord {
        ErrorRecord {
            schema_version: crate::output::SCHEMA_VERSION,
            kind: self.kind().to_string(),
            message: self.to_string(),
            experiment: experiment.map(str::to_string),
            config_hash: config_hash.map(str::to_string),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

/// Contents of `error.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub schema_version: u32,
    pub kind: String,
    pub message: String,
    pub experiment: Option<String>,
    pub config_hash: Option<String>,
}

pub type CliResult<T> = std::result::Result<T, CliError>;
