use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema has no roles")]
    EmptySchema,

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("unknown role `{0}`")]
    UnknownRole(String),

    #[error("unknown virtual predicate `{0}`")]
    UnknownVirtual(String),

    #[error("duplicate span [{begin},{end}] with role `{role}`")]
    DuplicateSpan {
        begin: usize,
        end: usize,
        role: String,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("infeasible generator config: {0}")]
    InfeasibleConfig(String),

    #[error("prediction in sentence `{0}` has no confidence")]
    MissingConfidence(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("line {line} (byte offset {offset}): {message}")]
    Parse {
        line: usize,
        offset: usize,
        message: String,
    },

    #[error("record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptySchema => "empty-schema",
            Error::InvalidSchema(_) => "invalid-schema",
            Error::UnknownRole(_) => "unknown-role",
            Error::UnknownVirtual(_) => "unknown-virtual",
            Error::DuplicateSpan { .. } => "duplicate-span",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::EmptyCorpus => "empty-corpus",
            Error::InfeasibleConfig(_) => "infeasible-config",
            Error::MissingConfidence(_) => "missing-confidence",
            Error::Alignment(_) => "alignment-error",
            Error::Parse { .. } => "parse-error",
            Error::InvalidRecord { .. } => "invalid-record",
            Error::InvalidConfig(_) => "invalid-config",
            Error::Checkpoint(_) => "checkpoint-error",
            Error::Io(_) => "io-error",
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
