use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error: {message}{}", index.map(|i| format!(" (index {i})")).unwrap_or_default())]
    Numeric { message: String, index: Option<usize> },

    #[error("format error: {message}{}", offset.map(|o| format!(" at byte offset {o}")).unwrap_or_default())]
    Format { message: String, offset: Option<u64> },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, index: Option<usize>) -> Self {
        Error::Numeric {
            message: msg.into(),
            index,
        }
    }

    pub(crate) fn format(msg: impl Into<String>, offset: Option<u64>) -> Self {
        Error::Format {
            message: msg.into(),
            offset,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
