use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum BmiError {
    #[error("dimension mismatch: {what} is {got_h}x{got_w}, expected {want_h}x{want_w}")]
    DimensionMismatch {
        what: &'static str,
        got_h: usize,
        got_w: usize,
        want_h: usize,
        want_w: usize,
    },
    #[error("grid {rows}x{cols} does not divide {height}x{width}")]
    IndivisibleGrid {
        height: usize,
        width: usize,
        rows: usize,
        cols: usize,
    },
    #[error("zero-area shape {height}x{width}")]
    ZeroArea { height: usize, width: usize },
    #[error("invalid grid {rows}x{cols}")]
    InvalidGrid { rows: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid value for {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("singular projection: position {position} has zero coverage and eta = 0")]
    SingularProjection { position: usize },
    #[error("non-finite iterate at iteration {iteration}")]
    NonFiniteState { iteration: usize },
    #[error("image {height}x{width} is smaller than the {window}x{window} SSIM window")]
    TooSmall {
        height: usize,
        width: usize,
        window: usize,
    },
    #[error("malformed file at byte {offset}: {reason}")]
    Malformed { offset: u64, reason: String },
    #[error("unsupported sample depth (maxval {0})")]
    UnsupportedDepth(u32),
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("invariant violated for {field}: {reason}")]
    InvariantViolation { field: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl BmiError {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            BmiError::DimensionMismatch { .. } => "DimensionMismatch",
            BmiError::IndivisibleGrid { .. } => "IndivisibleGrid",
            BmiError::ZeroArea { .. } => "ZeroArea",
            BmiError::InvalidGrid { .. } => "InvalidGrid",
            BmiError::ShapeMismatch(_) => "ShapeMismatch",
            BmiError::InvalidParameter { .. } => "InvalidParameter",
            BmiError::SingularProjection { .. } => "SingularProjection",
            BmiError::NonFiniteState { .. } => "NonFiniteState",
            BmiError::TooSmall { .. } => "TooSmall",
            BmiError::Malformed { .. } => "Malformed",
            BmiError::UnsupportedDepth(_) => "UnsupportedDepth",
            BmiError::BadMagic { .. } => "BadMagic",
            BmiError::UnsupportedVersion(_) => "UnsupportedVersion",
            BmiError::InvariantViolation { .. } => "InvariantViolation",
            BmiError::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = BmiError> = std::result::Result<T, E>;
