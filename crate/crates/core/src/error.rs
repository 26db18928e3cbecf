use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("numerical domain error: {0}")]
    Numerical(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("reward `{reward}` returned a non-finite value ({value})")]
    RewardEvaluation { reward: String, value: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("degenerate constraint: {0}")]
    DegenerateConstraint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure classes, used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Usage,
    Numerical,
    Io,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Parse { .. } => ErrorClass::Config,
            Error::Usage(_) | Error::Shape { .. } | Error::Unsupported(_) => ErrorClass::Usage,
            Error::Numerical(_)
            | Error::RewardEvaluation { .. }
            | Error::UndefinedMetric(_)
            | Error::DegenerateConstraint(_) => ErrorClass::Numerical,
            Error::Io { .. } => ErrorClass::Io,
            Error::AtStep { source, .. } => source.class(),
        }
    }
}
