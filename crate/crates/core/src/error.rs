use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric range: {0}")]
    NumericRange(String),

    #[error("time {requested} is beyond the simulated horizon {horizon}")]
    OutOfRange { requested: f64, horizon: f64 },

    #[error("agent {agent} has not reached value {requested}; highest reached is {highest}")]
    NotYetReached { agent: usize, requested: u64, highest: u64 },

    #[error("no closed form or density registered for {0}")]
    UnsupportedFamily(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{excluded} of {total} replicates excluded (limit is 1%)")]
    ExcessiveExclusions { excluded: usize, total: usize },

    #[error("result file schema version {found}, this build reads version {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("result header hash {stored} does not match recomputed {computed}")]
    HeaderHash { stored: String, computed: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericRange(msg.into())
    }
}
