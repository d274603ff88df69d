use std::path::PathBuf;

/// Errors produced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in {tensor}")]
    NonFinite { tensor: String },

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite intermediate at batch index {index}")]
    NonFiniteIntermediate { index: usize },

    #[error("x' = {x} lies outside the {layer} span [{lo}, {hi}]")]
    Domain {
        layer: &'static str,
        x: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("explicit scheme unstable: {0}")]
    Stability(String),

    #[error("non-finite loss term {term} at epoch {epoch}")]
    NonFiniteLoss { term: &'static str, epoch: usize },

    #[error("training diverged at epoch {epoch} (total loss {total:e})")]
    Diverged { epoch: usize, total: f64 },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
