use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point violates the manifold constraint (residual {residual:.3e})")]
    InvalidPoint { residual: f64 },

    #[error("vector is not tangent at the base point (residual {residual:.3e})")]
    InvalidTangent { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("stepsize {delta} exceeds the admissible bound {bound}")]
    StepsizeTooLarge { delta: f64, bound: f64 },

    #[error("brownian path not refined to level {level} (max level {max_level})")]
    LevelNotRefined { level: u32, max_level: u32 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

impl Error {
    /// Stable identifier for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPoint { .. } => "invalid-point",
            Error::InvalidTangent { .. } => "invalid-tangent",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NonFinite { .. } => "non-finite",
            Error::StepsizeTooLarge { .. } => "stepsize-too-large",
            Error::LevelNotRefined { .. } => "level-not-refined",
            Error::InvalidInput(_) => "invalid-input",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
