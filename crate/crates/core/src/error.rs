use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}: input is empty")]
    Empty(&'static str),

    #[error("corpus too small: need at least {required} tweets, got {found}")]
    CorpusTooSmall { required: usize, found: usize },

    #[error("insufficient negative pool: need {needed} eligible tweets, only {available} available")]
    InsufficientPool { needed: usize, available: usize },

    #[error("tweet too short: {len} tokens, at least {required} required")]
    TooShort { len: usize, required: usize },

    #[error("too few tweets: need at least {required}, got {found}")]
    TooFewTweets { required: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context} line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("no embedding for tweet `{0}`")]
    MissingEmbedding(String),

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("correlation undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("model format: {0}")]
    Format(String),

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
