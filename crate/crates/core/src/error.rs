use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("all weights are zero; nothing to normalize")]
    AllZeroWeights,
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("negative or non-finite probability at index {index}")]
    InvalidProbability { index: usize },
    #[error("grid points must be finite and strictly increasing (index {index})")]
    InvalidGrid { index: usize },
    #[error("label set must be non-empty with unique names")]
    InvalidLabels,
    #[error("truth value outside [0, 1] at row {row}, label {label}")]
    TruthOutOfRange { row: usize, label: usize },
    #[error("truth function of label {label} vanishes everywhere")]
    ZeroTruthFunction { label: usize },
    #[error("logical probability of label {label} is zero")]
    ZeroLogicalProbability { label: usize },
    #[error("prior is zero at index {index} where the likelihood is positive")]
    ZeroPrior { index: usize },
    #[error("marginal is zero ({axis} index {index})")]
    ZeroMarginal { axis: &'static str, index: usize },
    #[error("invalid parameters: {0}")]
    BadParams(&'static str),
    #[error("row {row} of the constraint kernel has no positive entry")]
    AllZeroRow { row: usize },
    #[error("partition value of row {row} is zero")]
    ZeroPartition { row: usize },
    #[error("parameter s = {s} has the wrong sign for {variant}")]
    SignMismatch { variant: &'static str, s: f64 },
    #[error("target {target} outside the achievable range [{low}, {high}]")]
    TargetOutOfRange { target: f64, low: f64, high: f64 },
    #[error("sampling distribution sits where every candidate truth function vanishes")]
    DegenerateSample,
    #[error("exponent outside the representable range")]
    OverflowGuard,
    #[error("no convergence after {iterations} iterations")]
    MaxIterExceeded { iterations: usize },
    #[error("{0}")]
    InvalidArgument(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
