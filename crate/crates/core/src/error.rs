use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while reading or validating input files.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("validation failed: {0}")]
    Validation(String),
}

impl ConfigError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        ConfigError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        ConfigError::Validation(message.into())
    }
}

/// Faults raised by the vehicle simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("slip-angle tire model requires v_x > {v_switch} m/s, got {vx} m/s")]
    LowSpeed { vx: f64, v_switch: f64 },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
}
