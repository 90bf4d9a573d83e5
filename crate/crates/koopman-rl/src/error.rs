use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: normal equations are numerically singular (add ridge > 0 or provide richer data)")]
    SingularSystem,

    #[error("non-finite state encountered during simulation")]
    NonFiniteState,

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("reference point is not an equilibrium (|f(x_e, 0)| = {residual:.3e})")]
    NotEquilibrium { residual: f64 },

    #[error("insufficient data: have {have}, need at least {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for configuration/file problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ModelFormat(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
