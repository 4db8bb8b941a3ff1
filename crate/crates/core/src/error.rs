use thiserror::Error;

/// Errors raised by the auditing library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid group weights: {0}")]
    InvalidWeights(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("no records left after conditioning for the selected metric")]
    EmptyAfterConditioning,
    #[error("groups with positive weight but no samples: {0:?}")]
    MissingGroup(Vec<usize>),
    #[error("instance too large for exhaustive computation: {0}")]
    InstanceTooLarge(String),
    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),
    #[error("estimator undefined: {0}")]
    EstimatorUndefined(String),
    #[error("group {0} has positive weight but zero inclusion probability")]
    ZeroInclusionProbability(usize),
    #[error("observed counts are impossible under the declared plan: {0}")]
    PlanMismatch(String),
    #[error("invalid epsilon: {0}")]
    InvalidEpsilon(String),
    #[error("epsilon out of range: {0}")]
    EpsilonOutOfRange(String),
    #[error("instances do not share the same group weights")]
    WeightMismatch,
    #[error("weights are not uniform")]
    NonUniformWeights,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}

pub type Result<T> = std::result::Result<T, Error>;
