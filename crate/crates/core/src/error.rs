//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("degenerate run: book was empty after {empty} of {events} post-transient events")]
    DegenerateRun { empty: usize, events: usize },

    #[error("insufficient scales in fit range: {found} found, at least 3 required")]
    InsufficientScales { found: usize },

    #[error("degenerate series: fluctuation function vanished at scale {scale}")]
    DegenerateSeries { scale: usize },

    #[error("insufficient repetitions in cell ({alpha_x}, {hurst_x}, {hurst_s}): {reps} < 2")]
    InsufficientReps {
        alpha_x: f64,
        hurst_x: f64,
        hurst_s: f64,
        reps: usize,
    },

    #[error("degenerate variance in column {0}")]
    DegenerateVariance(&'static str),

    #[error("insufficient data for regression: {0}")]
    InsufficientData(String),

    #[error("rank-deficient design matrix for model {0}")]
    RankDeficient(String),

    #[error("variable {variable} is not a linear term of model {model}")]
    VariableNotInModel { variable: String, model: String },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
