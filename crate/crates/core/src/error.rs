use std::path::PathBuf;

use thiserror::Error;

use crate::superop::SuperopIndex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid truncation: {0}")]
    Truncation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature did not converge for element {index}: value {value_re:e}{value_im:+e}i, error estimate {error_estimate:e}")]
    ElementNotConverged {
        index: SuperopIndex,
        value_re: f64,
        value_im: f64,
        error_estimate: f64,
    },

    #[error("positivity violation: eigenvalue {eigenvalue:e} below -{threshold:e} (integration tolerances too loose?)")]
    Positivity { eigenvalue: f64, threshold: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cache file {path}: {reason}")]
    CacheFormat { path: PathBuf, reason: String },

    #[error("cache file {path}: hash mismatch ({what})")]
    HashMismatch { path: PathBuf, what: String },

    #[error("point z={z} max_in={max_in} max_out={max_out}: {source}")]
    Point {
        z: f64,
        max_in: u32,
        max_out: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("cancelled")]
    Cancelled,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
