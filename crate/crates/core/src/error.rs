use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the benchmark pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("insufficient data: need {needed} rows, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("class {class} has {count} training samples, at least 2 are required")]
    SparseClass { class: usize, count: usize },

    #[error("feature width mismatch: model expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("label {label} out of range for {n_classes} classes")]
    InvalidLabel { label: usize, n_classes: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("gradient L1 norm {norm} exceeds clip bound {bound}")]
    UnclippedGradient { norm: f64, bound: f64 },

    #[error("calibration and evaluation sets overlap in {0} indices")]
    OverlappingSets(usize),

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("{path}: line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: line {line}, column {column}: cannot parse {value:?} as a number")]
    NonNumericCell {
        path: PathBuf,
        line: usize,
        column: usize,
        value: String,
    },

    #[error("results schema mismatch in column {column:?}: {reason}")]
    Schema { column: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("trial ({method}, eps={epsilon}, rep={rep}) failed: {source}")]
    Trial {
        method: String,
        epsilon: String,
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
