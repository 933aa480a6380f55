use std::path::PathBuf;

use thiserror::Error;

use crate::interval::ViewKind;

/// Errors raised anywhere in the selection pipeline.
#[derive(Debug, Error)]
pub enum NidfError {
    /// Bad user input: malformed files, invalid shapes, out-of-range parameters.
    #[error("input error: {0}")]
    Input(String),

    /// A numerical routine failed (eigen-solver, degenerate graph).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An error raised while processing one interval view.
    #[error("view {view}: {source}")]
    View {
        view: ViewKind,
        #[source]
        source: Box<NidfError>,
    },
}

impl NidfError {
    pub fn input(msg: impl Into<String>) -> Self {
        NidfError::Input(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        NidfError::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NidfError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 for input problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            NidfError::Input(_) | NidfError::Io { .. } => 2,
            NidfError::Numeric(_) => 3,
            NidfError::View { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, NidfError>;
