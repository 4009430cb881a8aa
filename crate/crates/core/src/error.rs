use thiserror::Error;

use crate::conic::Status;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible radius: delta0 = {delta0} but delta_min = {delta_min} (strict = {strict})")]
    InfeasibleRadius {
        delta0: f64,
        delta_min: f64,
        strict: bool,
    },

    #[error("solver returned {status:?}: {detail}")]
    Solver { status: Status, detail: String },

    #[error("no samples inside the covariate neighborhood")]
    EmptyNeighborhood,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
