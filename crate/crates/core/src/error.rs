use alloc::string::String;

use serde::{Deserialize, Serialize};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("embedding set has no rows")]
    EmptySet,
    #[error("embedding dimension must be at least 1")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at row {row}")]
    NonFiniteValue { row: usize },
    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("duplicate id {id:?} at row {row}")]
    DuplicateId { id: String, row: usize },
    #[error("negative loss at row {row}")]
    NegativeLoss { row: usize },
    #[error("ECLE at row {row} differs from the mean of its per-repeat losses")]
    InconsistentLoss { row: usize },
    #[error("cosine distance is undefined for a zero vector")]
    ZeroVector,
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("negative bank for sample {sample}, repeat {repeat} is empty")]
    EmptyNegatives { sample: usize, repeat: usize },
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("budget {budget} exceeds the {candidates} available candidates")]
    BudgetExceedsCandidates { budget: usize, candidates: usize },
    #[error("budget {budget} exceeds pool size {pool}")]
    BudgetExceedsPool { budget: usize, pool: usize },
    #[error("exhaustive search over {subsets} subsets exceeds the limit of {limit}")]
    InstanceTooLarge { subsets: u128, limit: u128 },
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("index {index} appears more than once or in both center and candidate sets")]
    OverlappingIndex { index: usize },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid mixture spec: {0}")]
    SpecInvalid(String),
    #[error("labels are required for {0}")]
    MissingLabels(&'static str),
}

/// Non-fatal conditions raised while scoring or clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Standardization input was constant (or had fewer than two values);
    /// the signal was replaced by zeros.
    DegenerateDistribution { signal: String },
    /// K-means was asked for more clusters than there are distinct rows.
    ClustersReduced { requested: usize, used: usize },
    /// The candidate set size was larger than the pool.
    CandidatesClamped { requested: usize, used: usize },
}
