use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid cone program: {0}")]
    InvalidProgram(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("active set must contain at least one access point")]
    EmptyActiveSet,

    #[error("no uplink power violations; price update needs a nonempty violating set")]
    EmptyViolatorSet,

    #[error("price update needs at least one access point outside the candidate set")]
    NoCandidateLeft,

    #[error("beamformer block for sleeping access point {ap} is nonzero")]
    SleepingApTransmits { ap: usize },

    #[error("exhaustive search limited to {cap} access points, got {got}")]
    ExhaustiveCapExceeded { cap: usize, got: usize },

    #[error("records mix experiment modes {0} and {1}")]
    MixedModes(String, String),

    #[error("no records to aggregate")]
    NoRecords,

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
