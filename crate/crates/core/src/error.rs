use thiserror::Error;

use crate::model::{ConfigViolation, ModelViolation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("incentive vector has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("arm index {arm} out of range for {n} arms")]
    ArmOutOfRange { arm: usize, n: usize },
    #[error("step {got} does not follow step {previous}")]
    StepNotIncreasing { previous: usize, got: usize },
    #[error("incentive {value} for arm {arm} at step {t} lies outside the feasible range")]
    IncentiveOutOfRange { t: usize, arm: usize, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex did not terminate within {iterations} pivots")]
    IterationLimit { iterations: usize },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("constraint row has {got} coefficients, expected {expected}")]
    Shape { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("chosen arm {arm} out of range for {n} arms")]
    ArmOutOfRange { arm: usize, n: usize },
    #[error("history is empty")]
    EmptyHistory,
    #[error("grid search refused: {n} arms exceeds the limit of {limit}")]
    GridTooLarge { n: usize, limit: usize },
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
    #[error("solver failed after {iterations} iterations: {source}")]
    Solver {
        iterations: usize,
        #[source]
        source: LpError,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("t = {t} lies before the first informative step k_tilde = {k_tilde}")]
    Domain { t: usize, k_tilde: usize },
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {}", join(.0))]
    Config(Vec<ConfigViolation>),
    #[error("reward model does not match configuration: {}", join(.0))]
    Model(Vec<ModelViolation>),
    #[error("step {t}: {source}")]
    Estimator {
        t: usize,
        #[source]
        source: EstimatorError,
    },
    #[error("step {t}: {source}")]
    History {
        t: usize,
        #[source]
        source: HistoryError,
    },
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
