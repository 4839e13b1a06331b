use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unexpected end of data")]
    UnexpectedEof,

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("not a GBNK container")]
    BadMagic,

    #[error("unsupported container version {0:#010x}")]
    VersionMismatch(u32),

    #[error("truncated container")]
    TruncatedContainer,

    #[error("corrupt container: {0}")]
    CorruptContainer(String),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sigma {0} is below 0.5, where the recursive design is unreliable; use the exact FIR smoother")]
    SigmaTooSmall(f64),

    #[error("image has {pixels} pixels, above the oracle limit of {limit}; pass --force to override")]
    OracleGuard { pixels: usize, limit: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Whether the error came from a numeric guard rather than from usage or
    /// I/O. The CLI maps these to exit status 2.
    pub fn is_numeric_guard(&self) -> bool {
        matches!(self, Error::OracleGuard { .. } | Error::SigmaTooSmall(_))
    }
}
