use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("arm ordering violated: prior mean of arm {arm} ({next}) exceeds that of arm {prev_arm} ({prev})")]
    ArmOrder {
        prev_arm: u32,
        prev: f64,
        arm: u32,
        next: f64,
    },

    #[error("mean {mean} is outside the legal range of the {family} reward family")]
    MeanOutOfRange { family: &'static str, mean: f64 },

    #[error("reward {reward} is outside the support of the {family} reward family")]
    RewardOutOfSupport { family: &'static str, reward: f64 },

    #[error("reward {reward} is outside [0, 1]; detail-free algorithms require bounded rewards")]
    RewardOutOfRange { reward: f64 },

    #[error("posterior is numerically degenerate: {0}")]
    DegeneratePosterior(String),

    #[error("prior is not persuadable: {0}")]
    PriorNotPersuadable(String),

    #[error("expected {expected} arms, got {actual}")]
    ArmCount { expected: String, actual: usize },

    #[error("unknown arm {0}")]
    UnknownArm(u32),

    #[error("unknown context {0}")]
    UnknownContext(u32),

    #[error("bandit protocol violation: {0}")]
    Protocol(String),

    #[error("policy {policy} is not total: no arm for context {context}")]
    PolicyNotTotal { policy: usize, context: u32 },

    #[error("prediction coupling is not configured: {0}")]
    CouplingNotConfigured(String),

    #[error("empty window [{from}, {to}]")]
    EmptyWindow { from: u64, to: u64 },

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
