use std::path::PathBuf;

use crate::tensor::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs} vs {rhs}")]
    ShapeMismatch { op: &'static str, lhs: Shape, rhs: Shape },

    #[error("invalid shape for {op}: {detail}")]
    InvalidShape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic {found:?}, expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },

    #[error("{path}: truncated {section} (expected {expected} bytes, got {got})")]
    Truncated {
        path: PathBuf,
        section: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{path}: size mismatch: {detail}")]
    SizeMismatch { path: PathBuf, detail: String },

    #[error("unsupported format version {version} in {path}")]
    UnsupportedVersion { path: PathBuf, version: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("autodiff: {0}")]
    Graph(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for failures of the numerical kind (non-finite values).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::BadMagic { .. }
                | Error::Truncated { .. }
                | Error::SizeMismatch { .. }
                | Error::UnsupportedVersion { .. }
                | Error::Checkpoint(_)
        )
    }
}
