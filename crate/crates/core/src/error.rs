use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid dimension {width}x{height}")]
    InvalidDimension { width: usize, height: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("pixel buffer length {len} does not match {width}x{height}x3")]
    BufferSize { width: usize, height: usize, len: usize },

    #[error("manifest error at {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("parse error: {0}")]
    Parse(String),

    #[error("input mismatch: {0}")]
    InputMismatch(String),
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("protocol error: {reason}; payload: {payload}")]
    Protocol { reason: String, payload: String },
    #[error("run error: {0}")]
    Run(String),
    #[error("report error: {0}")]
    Report(String),

    #[error("image codec error at {path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn manifest(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Manifest {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn protocol(reason: impl Into<String>, payload: impl Into<String>) -> Self {
        Error::Protocol {
            reason: reason.into(),
            payload: payload.into(),
        }
    }
}
