use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the training laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("subgroup (y=1, a={attr}) is empty")]
    MissingSubgroup { attr: u8 },

    #[error("stratum (y={label}, a={attr}) has {size} rows, too few to place one in every split")]
    StratumTooSmall { label: u8, attr: u8, size: usize },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("no width reaches train error <= {tolerance}")]
    NoInterpolation { tolerance: f64 },

    #[error("no threshold pair satisfies FNR gap <= {thr}")]
    Infeasible { thr: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("every run in cell {0} failed")]
    CellFailed(String),

    #[error("non-finite value in series `{0}`")]
    NonFiniteSeries(String),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: {source}")]
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

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
