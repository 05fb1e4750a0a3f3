use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("coefficients are not self-adjoint (imaginary part {0:.3e})")]
    NotSelfAdjoint(f64),

    #[error("input is not positive: {0}")]
    NotPositive(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("element is not certified in the maximal cone: {0}")]
    NotInMaxCone(String),

    #[error("invalid operator system: {0}")]
    InvalidSystem(String),

    #[error("malformed conic problem: {0}")]
    Malformed(String),

    #[error("unknown system reference `{0}`")]
    UnknownSystem(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
