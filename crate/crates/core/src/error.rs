use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length {len} is not a power of two")]
    NotPowerOfTwo { len: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("all candidates have non-finite fitness")]
    AllNonFinite,

    #[error("unsupported schema version {found} for {what} (expected {expected})")]
    SchemaVersion {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("training reached {accuracy:.2}% accuracy, below the required {required:.2}%")]
    NotConverged { accuracy: f64, required: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("stream fingerprints differ: {0} vs {1}")]
    FingerprintMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
