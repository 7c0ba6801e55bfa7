use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("program build error: {0}")]
    Build(String),

    #[error("numerical failure in conic solver: {message}")]
    NumericalFailure { message: String, trace: Vec<String> },

    #[error("program infeasible: {0}")]
    Infeasible(String),

    #[error("no rank-one solution found for any sampled eta")]
    NoRankOneFound,

    #[error("boundary verification failed: {0}")]
    VerificationFailed(String),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Stable process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse(_) => 1,
            Error::Validation { .. } | Error::Grid(_) | Error::Build(_) => 2,
            Error::NewtonDivergence { .. }
            | Error::NonPhysical(_)
            | Error::NumericalFailure { .. }
            | Error::Infeasible(_)
            | Error::NoRankOneFound => 3,
            Error::VerificationFailed(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
