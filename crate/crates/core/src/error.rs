use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("labels are not in order-of-appearance form at position {0}")]
    NonCanonicalLabels(usize),

    #[error("item {0} is out of range")]
    ItemOutOfRange(usize),

    #[error("item {0} is still seated")]
    ItemSeated(usize),

    #[error("item {0} is not seated")]
    ItemNotSeated(usize),

    #[error("cannot remove a point from an empty cluster")]
    StatsUnderflow,

    #[error("dimension {0} has zero variance")]
    ZeroVariance(usize),

    #[error("chain has no retained samples")]
    EmptyChain,

    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("io: {0}")]
    Io(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("iteration {iteration}, item {item}: {source}")]
    Sampler {
        iteration: usize,
        item: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
