use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a documented constraint.
    #[error("invalid config: {field} = {value}: {reason}")]
    Config {
        field: String,
        value: String,
        reason: String,
    },

    /// Malformed line or unknown key in a config file.
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    /// An operation received input that breaks its precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Timestamps must strictly increase.
    #[error("non-monotone time: t = {t} after previous t = {prev}")]
    NonMonotoneTime { prev: f64, t: f64 },

    /// A simulation produced a NaN or infinity.
    #[error("numerical abort at step {step}: {state}")]
    Numerical { step: usize, state: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: &str, value: impl ToString, reason: &str) -> Self {
        Error::Config {
            field: field.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical, 4 I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::ConfigParse { .. } => 2,
            Error::Numerical { .. } => 3,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 4,
            Error::InvalidInput(_) | Error::NonMonotoneTime { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
