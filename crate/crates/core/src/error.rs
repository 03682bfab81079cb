use std::io;
use std::path::{Path, PathBuf};

use crate::corpus::{AcosError, AlignError, ConlluError};

/// Crate-level error for anything that touches files.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Acos {
        path: PathBuf,
        #[source]
        source: AcosError,
    },
    #[error("{}: {source}", path.display())]
    Conllu {
        path: PathBuf,
        #[source]
        source: ConlluError,
    },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("annotated file has {annotated} sentences but the parse file has {parsed}")]
    SentenceCount { annotated: usize, parsed: usize },
    #[error("{}:{line}: {message}", path.display())]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
