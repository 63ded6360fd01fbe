use std::path::PathBuf;

use thiserror::Error;

/// Errors reported by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset file not found: {path}")]
    MissingFile { path: PathBuf },

    #[error("label column {column:?} not found in header")]
    MissingColumn { column: String },

    #[error("non-numeric feature cell in row {row}, column {column:?}: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset contains no examples")]
    EmptyDataset,

    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("class {label:+} has no examples")]
    ClassAbsent { label: i8 },

    #[error("split produced an empty {side} set")]
    EmptySplit { side: &'static str },

    #[error("minority class has {actual} examples, need at least {needed}")]
    TooFewMinority { needed: usize, actual: usize },

    #[error("target imbalance ratio {target} implies an empty minority class")]
    UnachievableRatio { target: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("labels must be -1 or +1, got {value}")]
    InvalidLabel { value: i64 },

    #[error("votes must be -1 or +1")]
    InvalidVote,

    #[error("weights are not a distribution: {reason}")]
    InvalidDistribution { reason: String },

    #[error("C-bound denominator {denominator:e} below guard; diversity is degenerate")]
    DegenerateDenominator { denominator: f64 },

    #[error("C-bound inapplicable: Gibbs risk {gibbs} exceeds 1/2")]
    BoundInapplicable { gibbs: f64 },

    #[error("no positive labels present")]
    NoPositives,

    #[error("empty sample")]
    EmptySample,

    #[error("model format error: {reason}")]
    ModelFormat { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
