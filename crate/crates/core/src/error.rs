use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid renewal law: {0}")]
    InvalidLaw(String),

    #[error("degenerate renewal law (variance is zero)")]
    DegenerateLaw,

    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid must be strictly increasing and inside [0, {horizon}]")]
    UnsortedGrid { horizon: f64 },

    #[error("kernel not PSD on grid")]
    NotPsd,

    #[error("Palm coupling at t = 0 needs at least one initial customer")]
    NoInitialPoints,

    #[error("replication budget {0} is below the minimum of 1000")]
    BudgetTooSmall(u64),

    #[error("rate exponent needs r >= 5, got {0}")]
    MomentOrderTooSmall(u32),

    #[error("the pure Poisson bound does not apply when x_n = {0} > 0")]
    NotPoisson(u64),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
