use crate::types::FrameTag;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("frame tag mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: String, found: FrameTag },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("pose list is empty")]
    EmptyPoses,

    #[error("image of {height}x{width} is too small (need at least {min}x{min})")]
    DegenerateSize { height: usize, width: usize, min: usize },

    #[error("no valid pixels: {0}")]
    NoValidPixels(&'static str),

    #[error("normalization mode mismatch: expected {expected}, found {found}")]
    ModeMismatch { expected: &'static str, found: String },

    #[error("degenerate alignment: prediction has zero variance")]
    DegenerateAlignment,

    #[error("unknown loss id `{0}`")]
    UnknownLoss(String),

    #[error("invalid scene config: {0}")]
    InvalidConfig(String),

    #[error("no visible geometry: every ray missed in frame {0}")]
    NoVisibleGeometry(usize),

    #[error("sequence needs at least 2 frames, got {0}")]
    TooFewFrames(usize),

    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}
