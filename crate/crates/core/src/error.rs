use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time order violated: {0}")]
    TimeOrder(String),

    #[error("negative exposure {0}")]
    NegativeExposure(f64),

    #[error("trace header not recognised: {0:?}")]
    TraceHeader(String),

    #[error("network file {path}: {reason}")]
    NetworkFormat { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("requested {seeds} seeds but the network has {population} users")]
    TooManySeeds { seeds: usize, population: usize },

    #[error("trace digests differ: {0} vs {1}")]
    TraceMismatch(String, String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
