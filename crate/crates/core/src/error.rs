use std::path::PathBuf;

/// Errors produced anywhere in the engine, data pipeline, or harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in layer `{layer}`: expected {expected}, got {got}")]
    Shape {
        layer: String,
        expected: String,
        got: String,
    },

    #[error("layer `{layer}`: sequence of length {len} is shorter than kernel {kernel}")]
    WindowTooShort { layer: String, len: usize, kernel: usize },

    #[error("layer `{layer}`: pool size {pool} exceeds input length {len}")]
    EmptyPool { layer: String, pool: usize, len: usize },

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parameters do not match spec: {0}")]
    ParamMismatch(String),

    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    #[error("target is not a one-hot vector over {classes} classes")]
    NotOneHot { classes: usize },

    #[error("non-finite {what} in layer `{layer}` at epoch {epoch}")]
    NonFinite {
        what: &'static str,
        layer: String,
        epoch: usize,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("duplicate subject id {0}")]
    DuplicateSubject(u16),

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("no subject files found in {0}")]
    NoSubjectFiles(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(layer: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            layer: layer.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
