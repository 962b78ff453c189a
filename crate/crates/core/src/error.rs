use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} is empty")]
    Empty { what: &'static str },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("{what}: requested {requested}, only {available} available")]
    TooFew {
        what: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("label channel `{channel}` has {got} entries for {expected} points")]
    LabelLength {
        channel: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("{op}: shape mismatch {shapes:?}")]
    Shape {
        op: &'static str,
        shapes: Vec<Vec<usize>>,
    },

    #[error("no occluded points in scene; sample rejected")]
    NoOccludedPoints,

    #[error("no surface points in scene; sample rejected")]
    NoSurfacePoints,

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn non_finite(what: impl Into<String>) -> Self {
        Error::NonFinite { what: what.into() }
    }
}
