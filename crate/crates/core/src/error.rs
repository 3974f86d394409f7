use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no input files given")]
    EmptyInput,

    #[error("corpus is empty after normalization")]
    EmptyCorpus,

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed index bundle: {0}")]
    Bundle(String),

    #[error("unknown term `{0}`")]
    UnknownTerm(String),

    #[error("generating set for `{0}` is empty after index filtering")]
    EmptyGeneratingSet(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace record {record}: {message}")]
    Trace { record: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
