//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Frames of discernment need at least two classes.
    #[error("frame must contain at least 2 classes, got {got}")]
    FrameTooSmall { got: usize },

    #[error("{context}: expected length {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("{context}: component {index} is negative ({value})")]
    Negative {
        context: String,
        index: usize,
        value: f64,
    },

    #[error("{context}: components sum to {sum}, expected 1")]
    NotNormalized { context: String, sum: f64 },

    /// An operation that divides by uncertainty hit u = 0.
    #[error("{context}: uncertainty is zero, mapping is undefined")]
    ZeroUncertainty { context: String },

    /// Dempster's rule is undefined when all mass products conflict.
    #[error("total conflict between sources, combination undefined")]
    TotalConflict,

    #[error("{func} is undefined for argument {value}")]
    Domain { func: &'static str, value: f64 },

    #[error("{context}: produced a non-finite value")]
    NonFinite { context: String },

    #[error("{context}: input is empty")]
    EmptyInput { context: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample {sample} has no label but one is required")]
    MissingLabel { sample: u64 },

    #[error("sample {sample} has label {label} outside [0, {classes})")]
    LabelOutOfRange {
        sample: u64,
        label: usize,
        classes: usize,
    },

    #[error("sample {sample} has no present views")]
    NoPresentViews { sample: u64 },

    /// Test-time imputation found no class whose centers cover the present views.
    #[error("sample {sample}: no class is scorable from its present views")]
    NoScorableClass { sample: u64 },

    #[error("no center for class {class}, view {view} (never observed together)")]
    MissingCenter { class: usize, view: usize },

    #[error("dataset format error at line {line}: {reason}")]
    DatasetFormat { line: usize, reason: String },

    #[error("checkpoint error: {reason}")]
    Checkpoint { reason: String },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for [`Error::DimensionMismatch`].
    pub fn dim(context: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            got,
        }
    }
}
