use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("k={k} out of range for n={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("vertex id {id} out of range for n={n}")]
    VertexOutOfRange { id: u64, n: usize },

    #[error("beam width L={l} must satisfy k <= L <= n (k={k}, n={n})")]
    InvalidBeamWidth { k: usize, l: usize, n: usize },

    #[error("empty graph")]
    EmptyGraph,

    #[error("graph has {graph_n} vertices but dataset has {data_n}")]
    GraphDatasetMismatch { graph_n: usize, data_n: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: truncated record at byte offset {offset}")]
    Truncated { path: PathBuf, offset: u64 },

    #[error("{path}: inconsistent dimension at byte offset {offset}: expected {expected}, got {got}")]
    InconsistentDim {
        path: PathBuf,
        offset: u64,
        expected: usize,
        got: usize,
    },

    #[error("{path}: line {line}: unparsable value `{value}`")]
    BadCsvValue {
        path: PathBuf,
        line: usize,
        value: String,
    },

    #[error("{path}: bad magic at byte offset 0 (not a graph file)")]
    BadMagic { path: PathBuf },

    #[error("{path}: unsupported graph format version {version}")]
    BadVersion { path: PathBuf, version: u16 },

    #[error("{path}: bad record at byte offset {offset}: {detail}")]
    BadRecord {
        path: PathBuf,
        offset: u64,
        detail: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("query {index} failed: {source}")]
    QueryFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("inconsistent analysis inputs: {0}")]
    InconsistentInputs(String),

    #[error("aligned inputs have mismatched lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation undefined: {0}")]
    DegenerateCorrelation(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
