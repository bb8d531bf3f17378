use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// Timing offset outside `[-(n + n_cp), n + n_cp)`.
    #[error("offset {offset} outside timing domain [{lo}, {hi})")]
    Domain { offset: f64, lo: f64, hi: f64 },

    /// A parameter violates its constraint. `key` is the dotted config path.
    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error("quadrature failed to converge on [{lo}, {hi}]: estimate {estimate:e}, error {error:e} after {evaluations} evaluations")]
    Numerical {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
