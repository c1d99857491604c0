use std::path::PathBuf;

use thiserror::Error;

use crate::audio_image::ImageError;
use crate::dsp::DspError;
use crate::tensor::TensorError;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Missing, unreadable or malformed input data.
    Input,
    /// Inconsistent configuration or a violated contract.
    Config,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{path}: malformed {what}: {reason}")]
    Format {
        path: PathBuf,
        what: &'static str,
        reason: String,
    },
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Tensor(_) | Error::Config(_) => ErrorKind::Config,
            Error::Dsp(DspError::InvalidParameter(_)) => ErrorKind::Config,
            Error::Dsp(_) | Error::Io { .. } | Error::Format { .. } => ErrorKind::Input,
            Error::Image(ImageError::Resolution(_)) => ErrorKind::Config,
            Error::Image(ImageError::Representation { source, .. }) => match source {
                DspError::InvalidParameter(_) => ErrorKind::Config,
                _ => ErrorKind::Input,
            },
            Error::Image(ImageError::Io { .. }) => ErrorKind::Input,
            Error::Sample { source, .. } => source.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, e: impl ToString) -> Self {
        Error::Io {
            path: path.into(),
            reason: e.to_string(),
        }
    }

    pub(crate) fn in_sample(self, id: &str) -> Self {
        Error::Sample {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
