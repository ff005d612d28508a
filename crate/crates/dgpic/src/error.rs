use std::path::{Path, PathBuf};

use dgpic_core::Error as CoreError;

pub type Result<T, E = DgpicError> = std::result::Result<T, E>;

/// Process exit codes.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum DgpicError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: unsupported format version {found} (expected {expected})")]
    Version { path: PathBuf, found: String, expected: String },
    #[error("{path}: checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Corrupt { path: PathBuf, stored: u32, computed: u32 },
    #[error("missing artifact for {what}: {path}")]
    Missing { what: String, path: PathBuf },
    #[error("{0}")]
    Refused(String),
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl DgpicError {
    pub fn exit_code(&self) -> i32 {
        match self {
            DgpicError::Usage(_) => EXIT_USAGE,
            DgpicError::Core(CoreError::Config(_)) => EXIT_USAGE,
            DgpicError::Core(CoreError::Numeric { .. } | CoreError::NonFinite(_)) => EXIT_NUMERIC,
            DgpicError::SelfCheck(_) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DgpicError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        DgpicError::Parse { path: path.to_path_buf(), line, msg: msg.into() }
    }

    pub(crate) fn format(path: &Path, msg: impl Into<String>) -> Self {
        DgpicError::Format { path: path.to_path_buf(), msg: msg.into() }
    }
}
