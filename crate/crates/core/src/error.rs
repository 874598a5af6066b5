use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("measure has no points")]
    EmptyMeasure,
    #[error("weight {index} is not strictly positive")]
    NonPositiveWeight { index: usize },
    #[error("weight {index} is negative")]
    NegativeWeight { index: usize },
    #[error("weights sum to {sum}, expected 1")]
    MassNotOne { sum: String },
    #[error("feature family must contain at least one feature")]
    EmptyFeatureFamily,
    #[error("feature row {row} has {len} values, expected {expected}")]
    RaggedFeatures { row: usize, len: usize, expected: usize },
    #[error("{labels} labels given for {expected} items")]
    LabelCount { labels: usize, expected: usize },
    #[error("induced metric does not separate points {0} and {1}")]
    SeparationFailure(usize, usize),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("coupling marginals do not match the prescribed measures")]
    MarginalMismatch,
    #[error("marginals carry different total mass")]
    InfeasibleMarginals,
    #[error("family is empty")]
    EmptyFamily,
    #[error("cell set is empty")]
    EmptyCellSet,
    #[error("function row {row} is not 1-Lipschitz")]
    NotLipschitzFamily { row: usize },
    #[error("witness feature is not 1-Lipschitz for the induced metric")]
    WitnessNotLipschitz,
    #[error("search space of {needed} exceeds budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("{cells} cells exceed the exact limit of {limit}")]
    SizeLimit { cells: usize, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
