use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the command-line front end for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numerics,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative rate {rate} for collapse term `{name}`")]
    NegativeRate { name: String, rate: f64 },

    #[error("inconsistent device parameters: {0}")]
    InconsistentDevice(String),

    #[error("integrator failure at t = {t} ps: {message}")]
    Integrator { t: f64, message: String },

    #[error("invariant violated at t = {t} ps: {message}")]
    Invariant { t: f64, message: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("{stage}: {message}")]
    Numerics { stage: String, message: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("sweep member {axis} = {value} failed: {source}")]
    Sweep {
        axis: String,
        value: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn numerics(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numerics {
            stage: stage.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::InconsistentDevice(_) | Error::NegativeRate { .. } => ErrorCategory::Config,
            Error::Io { .. } | Error::Serialization(_) => ErrorCategory::Io,
            Error::Sweep { source, .. } => source.category(),
            _ => ErrorCategory::Numerics,
        }
    }
}
