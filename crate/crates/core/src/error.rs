use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("error rate {rate} exceeds the random-classifier error 1 - 1/{classes}")]
    ErrorAboveChance { rate: f64, classes: usize },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("k = {k} out of range (reference set has {available} candidates)")]
    KOutOfRange { k: usize, available: usize },

    #[error("extrapolation fit is singular: all m^(-2/d) values coincide")]
    SingularFit,

    #[error("classifier did not converge within {iterations} iterations (final loss {final_loss})")]
    NotConverged { iterations: usize, final_loss: f64 },

    #[error("missing precomputed structure for {0}")]
    MissingCache(String),

    #[error("config: {0}")]
    Config(String),

    #[error("scoring: {0}")]
    Scoring(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }
}
