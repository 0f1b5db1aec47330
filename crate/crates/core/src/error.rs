use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node {node} out of range for graph with {n_nodes} nodes")]
    NodeOutOfRange { node: usize, n_nodes: usize },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("not enough non-edges: requested {requested}, graph has {available}")]
    NotEnoughNonEdges { requested: usize, available: usize },

    #[error("negative sampling gave up after {attempts} attempts")]
    SamplingExhausted { attempts: usize },

    #[error("nothing to reconstruct: {0}")]
    NothingToReconstruct(String),

    #[error("metric undefined: {0}")]
    DegenerateMetric(&'static str),

    #[error("backward: {0}")]
    Backward(&'static str),

    #[error("non-finite loss at epoch {epoch}: loss={loss} gae={gae} deg={deg}")]
    NonFiniteLoss {
        epoch: usize,
        loss: f64,
        gae: f64,
        deg: f64,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by user input (files, arguments, data) rather
    /// than by a failure inside the pipeline.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::Backward(_) | Error::ShapeMismatch { .. }
        )
    }
}
