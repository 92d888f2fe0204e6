use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no edges in input")]
    NoEdges,

    #[error("node id {id} out of range (graph has {n_nodes} nodes)")]
    NodeOutOfRange { id: usize, n_nodes: usize },

    #[error("unknown original node id {0}")]
    UnknownNode(i64),

    #[error("node {0} is already in the seed set")]
    AlreadySeed(usize),

    #[error("k = {k} exceeds the number of nodes ({n_nodes})")]
    KTooLarge { k: usize, n_nodes: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("bad binary format: {0}")]
    Format(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by NaN or infinite values.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}
