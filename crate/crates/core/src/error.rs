use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid quantum numbers, mismatched dimensions or otherwise bad arguments.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("product dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("integration failed at t = {t:.6e}: step size {step:.3e} underflowed ({steps} steps taken)")]
    StepUnderflow { t: f64, step: f64, steps: usize },

    #[error("ac decomposition failed: {reason} (residual {residual:.3e})")]
    Decomposition { reason: String, residual: f64 },

    #[error("invalid document: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
