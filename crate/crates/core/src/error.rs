use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("target {index} at {range_m} m is beyond the unambiguous range ({max_range_m} m)")]
    RangeOutOfBounds {
        index: usize,
        range_m: f64,
        max_range_m: f64,
    },

    #[error("target {index} lies outside the range-angle grid")]
    OutOfField { index: usize },

    #[error("unknown recipe `{0}`; valid recipes: close_targets_2010, close_targets_0010, mixed_5, persons_5, targets_8")]
    UnknownRecipe(String),

    #[error("map of {rows}x{cols} cells is smaller than the {win_rows}x{win_cols} CFAR window")]
    MapTooSmall {
        rows: usize,
        cols: usize,
        win_rows: usize,
        win_cols: usize,
    },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("model `{model}` does not support {what}")]
    Unsupported { model: &'static str, what: &'static str },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
