use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by graph construction, kernel setup, simulation and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("DIG construction error: {0}")]
    Dig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("simulation aborted at cycle {cycle}: {reason}")]
    Abort { cycle: u64, reason: String },
}

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        SimError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
