use thiserror::Error;

#[derive(Debug, Error)]
pub enum HoseError {
    #[error("mode {mode} out of range for an order-{order} tensor")]
    InvalidMode { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("tensor with {0} entries exceeds the capacity limit")]
    Capacity(usize),

    #[error("mode {mode} is rank deficient: smallest singular value {value:e} is below tolerance")]
    RankDeficient { mode: usize, value: f64 },

    #[error("mode {mode} has near-tied singular values at positions {i} and {j}")]
    DegenerateSpectrum { mode: usize, i: usize, j: usize },

    #[error("rank {rank} out of range 1..={max} for mode {mode}")]
    InvalidRank { mode: usize, rank: usize, max: usize },

    #[error("mode {mode}: singular value {sigma} sits on the threshold {threshold}")]
    ThresholdAtKink { mode: usize, sigma: f64, threshold: f64 },

    #[error("every entry of the core is thresholded away")]
    EmptyActiveSet,

    #[error("GSURE is undefined when the divergence ({divergence}) is at least p ({p})")]
    GsureUndefined { divergence: f64, p: usize },

    #[error("objective evaluated to a non-finite value")]
    NonFinite,

    #[error("{failed} of {reps} replicates failed")]
    StudyFailed { failed: usize, reps: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HoseError {
    /// Stable machine-readable name, used in the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            HoseError::InvalidMode { .. } => "InvalidMode",
            HoseError::Shape(_) => "ShapeError",
            HoseError::Capacity(_) => "CapacityError",
            HoseError::RankDeficient { .. } => "RankDeficient",
            HoseError::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            HoseError::InvalidRank { .. } => "InvalidRank",
            HoseError::ThresholdAtKink { .. } => "ThresholdAtKink",
            HoseError::EmptyActiveSet => "EmptyActiveSet",
            HoseError::GsureUndefined { .. } => "GsureUndefined",
            HoseError::NonFinite => "NonFinite",
            HoseError::StudyFailed { .. } => "StudyFailed",
            HoseError::InvalidParameter(_) => "InvalidParameter",
            HoseError::Parse(_) => "ParseError",
            HoseError::Io(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, HoseError>;
