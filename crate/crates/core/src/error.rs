use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid hole geometry: {0}")]
    InvalidGeometry(String),
    #[error("start offset range {offset} mm exceeds hole radius {radius} mm")]
    StartOffsetTooLarge { offset: f64, radius: f64 },
    #[error("simulator fault: non-finite state at tick {tick}")]
    NonFinite { tick: u32 },
    #[error("episode is not running")]
    EpisodeFinished,
    #[error("action code {0} out of range 0..=3")]
    InvalidAction(u8),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("non-finite {0}")]
    NonFiniteValue(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("unbalanced batches: {expert} expert vs {generated} generated")]
    UnbalancedBatch { expert: usize, generated: usize },
    #[error("empty record")]
    EmptyRecord,
    #[error("timestamps not strictly increasing at index {0}")]
    NonMonotoneTimestamps(usize),
    #[error("expert dataset is empty")]
    EmptyDataset,
    #[error("training observer failed: {0}")]
    Observer(String),
}

pub type Result<T> = core::result::Result<T, Error>;
