use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("log score is undefined for an improper predictive")]
    ImproperPredictive,
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("covariance matrix is not symmetric positive definite")]
    NonSpdCovariance,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Hyvarinen score requires a twice-differentiable log density{0}")]
    HyvarinenInapplicable(String),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("predictive is improper until more observations are seen (have {have})")]
    InsufficientHistory { have: usize },
    #[error("autocovariance matrix is not positive definite at leading dimension {dimension}")]
    NotPositiveDefinite { dimension: usize },
    #[error("AR polynomial has a root on or inside the unit circle (partial autocorrelation {pacf} at lag {lag})")]
    NonStationary { lag: usize, pacf: f64 },
    #[error("invalid autocovariance: {0}")]
    InvalidAutocovariance(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("transform is not strictly increasing at x = {0}")]
    NonMonotoneTransform(f64),
    #[error("rule {0} cannot score continuous predictives")]
    UnsupportedRule(String),
    #[error("at least {needed} models required, got {got}")]
    TooFewModels { needed: usize, got: usize },
    #[error("observation {index}: {source}")]
    AtObservation { index: usize, source: Box<Error> },
    #[error("invalid model spec `{spec}`: {reason}")]
    ModelSpec { spec: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Attach a 1-based observation index.
    pub fn at(self, index: usize) -> Self {
        Error::AtObservation {
            index,
            source: Box::new(self),
        }
    }

    /// The innermost error, with observation wrappers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtObservation { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
