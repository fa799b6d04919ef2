//! The `dpv` command line: simulate, discover, score and validate.

pub mod commands;
pub mod config;

use std::path::Path;

use dpv_core::{DataError, SearchError, SynthError, ValidationError, ValuationError};
use thiserror::Error;

pub use commands::{discover, score, simulate, validate, Outcome};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("search error: {0}")]
    Search(#[from] SearchError),
    #[error("model error: {0}")]
    Valuation(#[from] ValuationError),
    #[error("validation error: {0}")]
    Validation(#[from] ValidationError),
    #[error("synthetic data error: {0}")]
    Synth(#[from] SynthError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 1 for I/O failures, 2 for everything the user can fix in config or data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Data(DataError::Io(_)) => 1,
            CliError::Valuation(ValuationError::Io(_)) => 1,
            _ => 2,
        }
    }
}
