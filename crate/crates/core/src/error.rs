use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("unknown type code {0:?}")]
    UnknownTypeCode(String),

    #[error("empty body in sample {0}")]
    EmptyBody(String),

    #[error("insufficient text in sample {0}")]
    InsufficientText(String),

    #[error("lexicon {block}: {message}")]
    Lexicon { block: String, message: String },

    #[error("missing lexicon for block {0}")]
    MissingLexicon(String),

    #[error("missing embedding {0}")]
    MissingEmbedding(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty group {0}")]
    EmptyGroup(usize),

    #[error("unassigned tensor {0}")]
    UnassignedTensor(String),

    #[error("non-finite loss at sample {sample}: {detail}")]
    NonFiniteLoss { sample: String, detail: String },

    #[error("unknown sample {0}")]
    UnknownSample(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("embedding store: {0}")]
    Store(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
