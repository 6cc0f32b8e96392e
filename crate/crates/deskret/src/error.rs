//! Error type for the std layer: core failures plus I/O and file-format
//! problems, with enough structure for the CLI to report line numbers and
//! pick exit codes.

use std::fmt;

use deskret_core::CoreError;

#[derive(Debug)]
pub enum Error {
    Core(CoreError),
    Io(std::io::Error),
    /// Structural problem in a binary file (bad magic, truncation, ...).
    Format(String),
    /// Text input rejected at a specific 1-based line.
    Line { path: String, line: usize, message: String },
    /// I/O failure attributed to a specific file.
    File { path: String, source: std::io::Error },
}

impl Error {
    /// Attach `path` to a bare I/O error so messages name the file.
    pub fn at_path(self, path: &std::path::Path) -> Error {
        match self {
            Error::Io(source) => Error::File { path: path.display().to_string(), source },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Core(e) => e.fmt(f),
            Error::Io(e) => e.fmt(f),
            Error::Format(msg) => write!(f, "bad file format: {msg}"),
            Error::Line { path, line, message } => {
                write!(f, "{path}: line {line}: {message}")
            }
            Error::File { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Core(e) => Some(e),
            Error::Io(e) => Some(e),
            Error::File { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<CoreError> for Error {
    fn from(e: CoreError) -> Self {
        Error::Core(e)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub(crate) fn open_file(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io(e).at_path(path))
}

pub(crate) fn create_file(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::Io(e).at_path(path))
}
