use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid criterion configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid Gaussian state: {0}")]
    InvalidGaussian(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("criterion {0} is not supported here")]
    UnsupportedCriterion(crate::CriterionId),

    /// A bound that holds for every quantum state was violated; the inputs or
    /// the arithmetic are corrupted.
    #[error("internal consistency violation: {0}")]
    Consistency(String),

    #[error("soundness failure: {0}")]
    Soundness(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
