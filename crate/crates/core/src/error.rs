use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// The local design matrix at `x0` could not be inverted.
///
/// Carries enough context for a caller to widen the bandwidth or lower the
/// polynomial degree and retry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularDesign {
    pub x0: f64,
    pub bandwidth: f64,
    pub degree: usize,
    pub in_window_count: usize,
}

impl fmt::Display for SingularDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "singular design at x0={} (h={}, degree={}, {} point(s) in window)",
            self.x0, self.bandwidth, self.degree, self.in_window_count
        )
    }
}

impl std::error::Error for SingularDesign {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("row {row}: cannot parse `{value}` in column `{column}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("need at least {min} observations, got {n}")]
    TooFewObservations { n: usize, min: usize },

    #[error("covariate column is constant; cannot rescale to [0, 1]")]
    ConstantCovariate,

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("x = {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Singular(#[from] SingularDesign),

    #[error("{kind} regressor needs at least {needed} training points, got {got}")]
    InsufficientData {
        kind: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("oracle regressor requires the true regression function (simulation only)")]
    OracleUnavailable,

    #[error("evaluation point {0} not found in fit")]
    PointNotFound(f64),

    #[error("estimate at x0={0} failed; no inference available")]
    PointFailed(f64),

    #[error("{excluded} of {total} replications had zero variance (limit 5%)")]
    ExcessiveExclusions { excluded: usize, total: usize },

    #[error("every replication failed at n={n}")]
    AllReplicationsFailed { n: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
