use thiserror::Error;

/// Errors raised by the geometry, growth and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} is outside the supported range 1..={max}", max = crate::space::MAX_DIM)]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {value} on axis {axis} lies outside [0, 1]")]
    OutOfCube { axis: usize, value: f64 },

    #[error("steer called with dist {dist} <= epsilon {epsilon}; the target is reachable directly")]
    SteerWithinStep { dist: f64, epsilon: f64 },

    #[error("steer direction is undefined: target coincides with the nearest vertex")]
    ZeroDirection,

    #[error("nearest-neighbour query on an empty point set")]
    EmptyIndex,

    #[error("vertex index {index} out of range for tree of {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("operation requires a {expected} tree, got {got}")]
    WrongTreeKind {
        expected: &'static str,
        got: &'static str,
    },

    #[error("index holds {index_len} points but tree has {tree_len} nodes")]
    IndexOutOfSync { index_len: usize, tree_len: usize },

    #[error("grid of {cells_per_axis}^{d} cells exceeds the 2^31 cell limit; increase epsilon or lower d")]
    GridTooLarge { d: usize, cells_per_axis: u64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("malformed tree file at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
