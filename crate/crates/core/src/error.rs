use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("vehicle position coincides with the RSU")]
    CoincidentPosition,
    #[error("channel vector requested at zero distance")]
    ZeroDistance,
    #[error("MRT combination of channels has zero norm")]
    DegenerateChannel,
    #[error("SINR must be positive, got {0}")]
    NonPositiveSinr(f64),
    #[error("AoI bounds are degenerate (max == min); horizon must exceed one slot")]
    DegenerateBounds,
    #[error("invalid decoding order: {0}")]
    InvalidOrder(String),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("network architectures differ")]
    ArchitectureMismatch,
    #[error("backward pass called without a cached forward pass")]
    MissingCache,
    #[error("step called on a finished episode")]
    EpisodeDone,
    #[error("empty batch")]
    EmptyBatch,
    #[error("point ({0}, {1}) lies outside the reference box")]
    OutsideReferenceBox(f64, f64),
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig { field, reason: reason.into() }
    }
}
