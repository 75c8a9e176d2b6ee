//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while parsing or assembling datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: malformed token `{token}`")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: feature index {index} is not strictly increasing")]
    NonIncreasingIndex { line: usize, index: u32 },
    #[error("line {line}: feature index must be >= 1")]
    ZeroIndex { line: usize },
    #[error("line {line}: label `{label}` not mappable under {policy} policy")]
    UnmappableLabel {
        line: usize,
        label: String,
        policy: &'static str,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample id {id} out of range (n_samples = {n})")]
    SampleOutOfRange { id: usize, n: usize },
}

/// Errors raised by configuration validation.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("C must be positive, got {0}")]
    InvalidC(f64),
    #[error("sigma2 must be positive, got {0}")]
    InvalidSigma2(f64),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("worker count must be >= 1")]
    InvalidWorkers,
    #[error("unknown heuristic `{0}`")]
    UnknownHeuristic(String),
    #[error("shrinking fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
}

/// Errors raised by the trainers.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set must contain both classes")]
    MissingClass,
    #[error(
        "no convergence after {iterations} iterations (beta_up = {beta_up}, beta_low = {beta_low})"
    )]
    NonConvergence {
        iterations: u64,
        beta_up: f64,
        beta_low: f64,
    },
    #[error(
        "optimizer stalled at iteration {iterations} without reaching tolerance \
         (beta_up = {beta_up}, beta_low = {beta_low})"
    )]
    Stalled {
        iterations: u64,
        beta_up: f64,
        beta_low: f64,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Errors raised by model persistence and evaluation.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model has no support vectors")]
    NoSupportVectors,
    #[error("model file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unsupported model version `{0}`")]
    VersionMismatch(String),
    #[error("model file truncated: expected {expected} support vectors, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
