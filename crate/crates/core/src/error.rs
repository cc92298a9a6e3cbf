use std::path::PathBuf;
use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {context}: expected {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    Dimension {
        context: &'static str,
        expected_h: usize,
        expected_w: usize,
        got_h: usize,
        got_w: usize,
    },

    #[error("invalid parameter `{name}`: {message}")]
    Parameter { name: &'static str, message: String },

    #[error("solver diverged (non-finite iterate) at layer {layer}{}",
            sample.map(|s| format!(" on sample {s}")).unwrap_or_default())]
    Diverged { layer: usize, sample: Option<usize> },

    #[error("PGM parse error at byte {offset}: {message}")]
    PgmParse { offset: usize, message: String },

    #[error("unsupported PGM format: {0}")]
    PgmFormat(String),

    #[error("reference file error: {0}")]
    ReferenceFormat(String),

    #[error("manifest error in {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn dimension(
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    ) -> Self {
        Error::Dimension {
            context,
            expected_h: expected.0,
            expected_w: expected.1,
            got_h: got.0,
            got_w: got.1,
        }
    }

    pub fn parameter(name: &'static str, message: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
