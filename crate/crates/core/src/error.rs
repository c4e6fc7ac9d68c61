use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("non-binary mask: value {0} is neither 0 nor 255")]
    NonBinaryMask(u8),

    #[error("probability out of range: {0}")]
    ProbabilityOutOfRange(f32),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("segmenter backend: {0}")]
    Backend(String),

    #[error("single-class outcome")]
    SingleClass,

    #[error("singular design matrix")]
    SingularDesign,

    #[error("zero standard deviation")]
    ZeroVariance,

    #[error("not found: {0}")]
    NotFound(String),

    #[error("stale revision: expected {expected}, got {actual}")]
    StaleRevision { expected: u64, actual: u64 },

    #[error("replay mismatch: {0} pixels differ between the replayed log and the submitted mask")]
    ReplayMismatch(usize),

    #[error("invalid edit log: {0}")]
    InvalidEditLog(String),

    #[error("{0}")]
    State(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether the failure is attributable to caller input (bad files, bad
    /// arguments, protocol violations) rather than to the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Backend(_))
    }
}
