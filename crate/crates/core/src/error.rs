use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown generator label `{0}`")]
    UnknownLabel(String),

    #[error("step size underflow at z = {z:.6e} (h = {h:.3e})")]
    StepSizeUnderflow { z: f64, h: f64 },

    #[error("integration exceeded {max_steps} steps at z = {z:.6e}")]
    TooManySteps { z: f64, max_steps: usize },

    #[error("root finding did not converge: {0}")]
    NoConvergence(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("empty fit window [{start}, {end}]")]
    EmptyFitWindow { start: f64, end: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
