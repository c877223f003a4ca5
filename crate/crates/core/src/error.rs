use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {left} vs {right}")]
    Shape {
        context: String,
        left: String,
        right: String,
    },

    #[error("non-finite value produced in {0}")]
    NonFinite(String),

    #[error("{family} models do not expose input gradients")]
    NotDifferentiable { family: &'static str },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("surrogate protocol violation: {0}")]
    Protocol(String),

    #[error("query budget exhausted after {queries} scored rows")]
    QueryBudget { queries: u64 },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("dataset snapshot hash mismatch: model was trained on {expected}, snapshot is {found}")]
    HashMismatch { expected: String, found: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub fn shape(
        context: impl Into<String>,
        left: impl Into<String>,
        right: impl Into<String>,
    ) -> Self {
        Error::Shape {
            context: context.into(),
            left: left.into(),
            right: right.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
