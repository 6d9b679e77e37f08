use std::io;

use thiserror::Error;

/// Coarse error classes, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Io => "io",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: invalid UTF-8")]
    Decode { line: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid segmentation: {0}")]
    Validation(String),
    #[error("embedding dimension {found} does not match configured d_e={expected}")]
    EmbeddingDim { expected: usize, found: usize },
    #[error("vocabulary entries must be non-empty")]
    EmptyWord,
}

#[derive(Debug, Error)]
pub enum NumericError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("non-finite value at node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },
    #[error("loss node {0} is not a scalar")]
    NonScalarLoss(usize),
    #[error("invalid uniform range [{low}, {high})")]
    InvalidRange { low: f64, high: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch")]
    Checksum,
    #[error("model file truncated")]
    Truncated,
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("model variant is {found}, expected {expected}")]
    VariantMismatch {
        found: &'static str,
        expected: &'static str,
    },
    #[error("operation requires a DAG encoder, model variant is {0}")]
    UnsupportedVariant(&'static str),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            Error::Corpus(CorpusError::EmbeddingDim { .. }) => ErrorKind::Config,
            Error::Corpus(_) => ErrorKind::Data,
            Error::Numeric(NumericError::InvalidRange { .. }) => ErrorKind::Config,
            Error::Numeric(_) => ErrorKind::Numeric,
            Error::Config(_) => ErrorKind::Config,
            Error::ModelIo(ModelIoError::VariantMismatch { .. })
            | Error::ModelIo(ModelIoError::UnsupportedVariant(_)) => ErrorKind::Config,
            Error::ModelIo(_) => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
