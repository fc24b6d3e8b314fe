use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the extraction engine and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{path}: cannot encode image: {message}")]
    Encode { path: PathBuf, message: String },

    /// A malformed record in a line-oriented file. `line` is 1-based.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("invalid value: {0}")]
    Validation(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty palette")]
    EmptyPalette,

    #[error("no illuminant evidence: image is entirely black")]
    NoIlluminantEvidence,

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },

    #[error("empty object region")]
    EmptyObjectRegion,

    #[error("disjoint attentions")]
    DisjointAttentions,

    #[error("insufficient pixels: {support} in support, need at least {k}")]
    InsufficientPixels { support: usize, k: usize },

    #[error("misaligned inputs: {0}")]
    Misaligned(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
