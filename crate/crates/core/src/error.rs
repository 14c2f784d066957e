use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sketches, workloads and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty trace")]
    EmptyTrace,

    #[error("prediction for position {position} requested but only {len} positions are known")]
    PositionOutOfRange { position: u64, len: u64 },

    #[error(
        "guarantee violated at arrival {position}: estimate {estimate}, exact {exact}, slack {slack}"
    )]
    GuaranteeViolated {
        position: u64,
        estimate: u64,
        exact: u64,
        slack: f64,
    },
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
