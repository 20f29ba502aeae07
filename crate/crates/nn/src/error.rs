use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("loss diverged at epoch {epoch} (learning rate {learning_rate}); try a smaller learning rate")]
    Diverged { epoch: usize, learning_rate: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Data(#[from] optlab_core::market_data::DataError),
}

pub type Result<T> = std::result::Result<T, NnError>;
