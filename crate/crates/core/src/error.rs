use thiserror::Error;

/// Errors raised anywhere in the simulation and analysis chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cutoff mismatch: {0} vs {1}")]
    CutoffMismatch(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid mode selection: {0}")]
    InvalidModes(String),

    #[error("matrix is not Hermitian (max |M - M†| = {0:e})")]
    NotHermitian(f64),

    #[error("state is not normalized (trace {0})")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("displacement |alpha| = {alpha} leaks {leak:e} of the norm past cutoff {cutoff}")]
    DisplacementOutOfRange { alpha: f64, leak: f64, cutoff: usize },

    #[error("cutoff {cutoff} too small: truncation error {error:e} exceeds {bound:e}")]
    CutoffTooSmall { cutoff: usize, error: f64, bound: f64 },

    #[error("no post-selectable events (success probability P = 0)")]
    NoPostSelection,

    #[error("quadrature grid too coarse: density integrates to {0}")]
    GridTooCoarse(f64),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("config error: {0}")]
    Config(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("missing quantity `{0}` for comparison")]
    MissingQuantity(String),

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
