use std::path::PathBuf;

/// Errors from reading the text formats.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    MalformedHeader { expected: &'static str, found: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("entry count mismatch: header declares {declared}, found {found}")]
    EntryCountMismatch { declared: usize, found: usize },
    #[error("line {line}: index ({row}, {col}) out of range for a {rows}x{cols} mask")]
    IndexOutOfRange {
        line: usize,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("line {line}: duplicate entry ({row}, {col})")]
    DuplicateEntry { line: usize, row: usize, col: usize },
    #[error("line {line}: entries must be sorted row-major")]
    Unsorted { line: usize },
    #[error("row count mismatch: header declares {declared}, found {found}")]
    RowCountMismatch { declared: usize, found: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sgap_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for domain errors, 4 for
    /// solver divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(sgap_core::Error::Divergence { .. }) => 4,
            Error::Core(e) if e.is_domain() => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
