use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the inversion pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported prior structure: {0}")]
    UnsupportedPrior(String),

    #[error("non-normalizable conditional at coordinate {index} (quadratic coefficient {a})")]
    NonNormalizable { index: usize, a: f64 },

    #[error("not enough samples: have {have}, need at least {need}")]
    NotEnoughSamples { have: usize, need: usize },

    #[error("search bracket [{lo}, {hi}] does not straddle target {target}")]
    BracketMismatch { lo: f64, hi: f64, target: f64 },

    #[error("could not place {requested} spots without overlap (placed {placed})")]
    PhantomPlacement { requested: usize, placed: usize },

    #[error("forward image is identically zero; noise level undefined")]
    ZeroForwardImage,

    #[error("config error: {0}")]
    Config(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
