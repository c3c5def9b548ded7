//! Error types shared across the crate.

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file did not match its declared format (bad magic, header mismatch,
    /// out-of-range values).
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Pipeline configuration failed validation or parsing.
    #[error("config error: {0}")]
    Config(String),

    /// No trajectory is alive at the proposal's frame, so nothing can be
    /// marked foreground or background.
    #[error("unmarkable proposal: no trajectory alive at frame {frame}")]
    UnmarkableProposal { frame: usize },

    /// A cluster projected onto supervoxels produced an empty mask in every
    /// frame.
    #[error("empty projection: cluster produced no pixels in any frame")]
    EmptyProjection,

    /// A pipeline stage failed; carries the stage name and the identifier of
    /// the input being processed.
    #[error("stage {stage} failed on {item}: {source}")]
    Stage {
        stage: &'static str,
        item: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wrap an error with the pipeline stage and input identifier it occurred on.
    pub fn in_stage(self, stage: &'static str, item: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            item: item.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
