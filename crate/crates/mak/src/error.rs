use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed header: {reason}", path.display())]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("{}: header declares {expected} values, payload holds {found}", path.display())]
    DimensionMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("{}: non-finite value in row {row}", path.display())]
    NonFiniteValue { path: PathBuf, row: usize },
    #[error("{}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Invalid {
        path: PathBuf,
        #[source]
        source: mak_core::Error,
    },
    #[error(transparent)]
    Core(#[from] mak_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// 1 = usage, 2 = input validation, 3 = internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Write { .. } | Error::Internal(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn read(path: &Path, source: std::io::Error) -> Self {
        Error::Read {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn write(path: &Path, source: std::io::Error) -> Self {
        Error::Write {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn header(path: &Path, reason: impl Into<String>) -> Self {
        Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(path: &Path, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// Attaches `path` to a validation error raised by the core crate.
    pub(crate) fn invalid(path: &Path, source: mak_core::Error) -> Self {
        match source {
            mak_core::Error::NonFiniteValue { row } => Error::NonFiniteValue {
                path: path.to_path_buf(),
                row,
            },
            source => Error::Invalid {
                path: path.to_path_buf(),
                source,
            },
        }
    }
}
