use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported pilot count {0}: must be a power of two")]
    UnsupportedPilotCount(usize),
    #[error("invalid length: {0}")]
    InvalidLength(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("user {user} already subtracted from slot {slot}")]
    DoubleSubtraction { user: usize, slot: usize },
    #[error("user {user} has no replica in slot {slot}")]
    NoReplica { user: usize, slot: usize },
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

pub type Result<T> = std::result::Result<T, Error>;
