use thiserror::Error;

/// Errors raised by instance construction, rule invocation and mechanism evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("district {0} is empty")]
    EmptyDistrict(usize),
    #[error("instance needs at least one district")]
    NoDistricts,
    #[error("instance needs at least one alternative")]
    NoAlternatives,
    #[error("triangle inequality violated: d({0},{1}) > d({0},{2}) + d({2},{1})")]
    TriangleViolation(usize, usize, usize),
    #[error("distance matrix is not symmetric at ({0},{1})")]
    AsymmetricMatrix(usize, usize),
    #[error("negative or non-finite distance at ({0},{1})")]
    NegativeDistance(usize, usize),
    #[error("distance matrix must be square with zero diagonal: {0}")]
    MalformedMatrix(String),
    #[error("districts do not partition the agents: {0}")]
    BadPartition(String),
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("declared ranking for agent {agent} is inconsistent: {reason}")]
    InconsistentRanking { agent: usize, reason: String },
    #[error("rule received an empty voter set")]
    EmptyVoterSet,
    #[error("median rule needs the line axis")]
    MissingAxis,
    #[error("plurality matching found no winner; the matching routine is broken")]
    InternalNoWinner,
    #[error("operation requires a line metric")]
    NotLineMetric,
    #[error("lambda must be at least 1, got {0}")]
    LambdaBelowOne(f64),
    #[error("inner objective failed the {0} property check")]
    PropertyCheckFailed(String),
    #[error("rule `{rule}` is incompatible with this instance: {reason}")]
    IncompatibleRuleMetric { rule: String, reason: String },
    #[error("generator error: {0}")]
    GeneratorError(String),
    #[error("family parameter too large: {0}")]
    TooLarge(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}
