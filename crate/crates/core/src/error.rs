use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid segment: length must be positive, got {length}")]
    InvalidSegment { length: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A generator rule produced a value outside its admissible interval.
    #[error("generator inconsistency at k={k}: {quantity}={value} outside [{lo}, {hi}]")]
    GeneratorInconsistency {
        k: usize,
        quantity: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("method not applicable: {0}")]
    MethodInapplicable(String),

    #[error("regularized subproblem hard case: {0}")]
    HardCase(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),

    #[error("slope fit needs at least 3 distinct eps values, got {found}")]
    TooFewPoints { found: usize },

    #[error("method `{method}` has no matching configuration for family `{family}`")]
    UnsupportedPairing { family: String, method: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}
