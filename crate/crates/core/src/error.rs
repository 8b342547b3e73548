use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    /// Motion direction is parallel to the normal or too short to define a tangent.
    #[error("degenerate tangent direction")]
    DegenerateDirection,

    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite state in {0}")]
    NonFiniteState(String),

    #[error("operation requires a {expected} environment, got {found}")]
    WrongVariant { expected: &'static str, found: &'static str },

    #[error("key-pose schedule is empty")]
    EmptySchedule,

    #[error("peg is not aligned with the hole axis (lateral offset {offset:.4} m)")]
    NotAligned { offset: f64 },

    #[error("board has no ink left to wipe")]
    NothingToWipe,

    #[error("no contact manifold for this environment state")]
    NoContactManifold,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("observation time {time} is past the end of the demonstration ({len} steps)")]
    EndOfDemo { time: usize, len: usize },

    #[error("config error: {0}")]
    ConfigParse(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
