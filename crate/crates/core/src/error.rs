use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    DimensionMismatch {
        what: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("density calibration failed: {0}")]
    Calibration(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("solver is not deterministic: two identical solves differ")]
    Nondeterministic,

    #[error("malformed grid file: {0}")]
    Format(String),

    #[error("all realizations failed: {0}")]
    RunFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
