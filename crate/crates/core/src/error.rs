use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no evidence: all counts are zero")]
    EmptyCounts,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("iteration index must be at least 1")]
    ZeroIteration,

    #[error("observation contains NaN")]
    NanObservation,

    #[error("node {node} out of range (controller has {n_nodes} nodes)")]
    NodeOutOfRange { node: usize, n_nodes: usize },

    #[error("unknown macro-action {ma} (robot has {n_mas})")]
    UnknownMacroAction { ma: usize, n_mas: usize },

    #[error("domain contract violated: {0}")]
    ContractViolation(String),

    #[error("search space of {size} policies exceeds the enumeration guard of {limit}")]
    SearchSpaceTooLarge { size: f64, limit: f64 },

    #[error("incompatible policy: {0}")]
    IncompatiblePolicy(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
