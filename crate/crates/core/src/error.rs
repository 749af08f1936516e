use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: cannot parse {text:?} as a number")]
    Parse {
        path: PathBuf,
        line: usize,
        text: String,
    },

    #[error("{path}:{line}: delay sample {value} is negative")]
    NegativeSample {
        path: PathBuf,
        line: usize,
        value: f64,
    },

    #[error("{0}: no delay samples")]
    EmptySamples(PathBuf),

    #[error(
        "solver did not converge after {iterations} iterations: bracket [{lo}, {hi}], residual {residual:e}"
    )]
    NoConvergence {
        iterations: usize,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    #[error("fixed-point equation has {} sign changes: brackets {brackets:?}", brackets.len())]
    MultipleRoots { brackets: Vec<(f64, f64)> },

    #[error("no sign change found while expanding the bracket up to {hi}")]
    NoBracket { hi: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
