use std::path::PathBuf;

use thiserror::Error;

/// Error type shared by every module in the crate.
///
/// The variants map onto the CLI exit codes: `Numerical` exits with 3,
/// everything else here exits with 2 (usage errors are handled by the
/// argument parser and exit with 1).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A domain invariant was violated (bad rating, empty lexicon, ...).
    #[error("{0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Optimization produced a non-finite value.
    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    /// The command line itself was unusable (missing required flag, ...).
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code used by the CLI for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Numerical { .. } => 3,
            _ => 2,
        }
    }

    /// Short machine-parsable tag printed as the error prefix.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Numerical { .. } => "numerical",
            _ => "data",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
