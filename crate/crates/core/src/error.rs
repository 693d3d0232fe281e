use thiserror::Error;

/// Errors raised by the algebra, structure and flow routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("endomorphism is not skew-symmetric (|K + K^T| = {asymmetry:.3e})")]
    NotSkew { asymmetry: f64 },

    #[error("no solution found: {0}")]
    NotFound(String),

    #[error("flow diverged at step {step} (t = {t})")]
    FlowDiverged {
        step: usize,
        t: f64,
        trace: Box<crate::torus::FlowTrace>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
