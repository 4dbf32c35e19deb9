use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by instance handling, solvers, and file ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative coefficient in {field} at ({row}, {col})")]
    NegativeCoefficient {
        field: &'static str,
        row: usize,
        col: usize,
    },

    #[error("right-hand side {field}[{index}] = {value} must be positive")]
    NonPositiveRhs {
        field: &'static str,
        index: usize,
        value: f64,
    },

    #[error("{0}")]
    Domain(String),

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("{kind} '{name}' has no finite bound; set a replica cap or a positive cost")]
    UnboundedVariable { kind: &'static str, name: String },

    #[error("no rounding certificate found within the calibration grid")]
    NoCertificate,

    #[error("root estimator value {0} is not below 1")]
    RootNotCertified(f64),

    #[error("estimator reached {value} after fixing {variable}; certificate lost")]
    DerandomizationFailed { value: f64, variable: String },

    #[error("simplex did not converge within {0} pivots")]
    PivotLimit(usize),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
