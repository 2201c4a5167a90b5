use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("dimension {0} outside 1..=64")]
    InvalidDimension(usize),
    #[error("cardinality m={m} invalid for d={d}")]
    InvalidCardinality { d: usize, m: usize },
    #[error("action set is empty")]
    EmptyActionSet,
    #[error("invalid action {0}")]
    InvalidAction(String),
    #[error("duplicate action {0}")]
    DuplicateAction(String),
    #[error("feedback has {got} values for an action with {expected} arms")]
    FeedbackMismatch { expected: usize, got: usize },
    #[error("observation dimension mismatch: stats track {expected} arms, action reaches arm {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no feasible action satisfies the query constraints")]
    EmptyFeasibleSet,
    #[error("feasible set has {size} actions, above the enumeration cap {cap}")]
    EnumerationBudgetExceeded { size: u128, cap: u128 },
    #[error("top-m fast path requires an unconstrained cardinality query")]
    FastPathUnsupported,
    #[error("approximation factor {0} outside (0, 1]")]
    InvalidAlpha(f64),
    #[error("joint support of {size} outcomes exceeds budget {budget}")]
    JointSupportBudgetExceeded { size: u128, budget: u128 },
    #[error("weight vector has {got} entries, expected {expected}")]
    WeightLength { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("horizon T={0} must be at least 4")]
    HorizonTooShort(u64),
    #[error("epoch count M={m} outside 2..={max} for T={t}")]
    InvalidEpochCount { t: u64, m: usize, max: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ellipsoid bonus needs every arm observed; arm {0} is unseen")]
    UnseenArm(usize),
    #[error("value {0} outside [0, 1]")]
    OutOfUnitInterval(f64),
    #[error("malformed results file: {0}")]
    Malformed(String),
    #[error("schema version {found} not supported (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
