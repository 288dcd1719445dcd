use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("control is not in the cone: {0}")]
    ConstraintViolation(String),

    #[error("time {t} outside horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("driver infimum diverges to -inf at t={t}, P={p} ({branch:?} branch)")]
    IllPosed {
        t: f64,
        p: f64,
        branch: crate::driver::Branch,
    },

    #[error("tree fixed-point iteration diverged at step {step}, node {node}")]
    SchemeDivergence { step: usize, node: usize },

    #[error("matrix is singular or not positive definite: {0}")]
    SingularMatrix(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
