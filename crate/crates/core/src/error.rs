use thiserror::Error;

/// Errors raised across the toolkit. Each variant maps onto one failure
/// class of the public operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("beat {beat} has no sounding note in voice {voice}")]
    EmptyBeat { voice: usize, beat: usize },
    #[error("range error: {0}")]
    Range(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("scope error: {0}")]
    Scope(String),
    #[error("feature ({a}, {b}, {i}, {i}, 0) with a != b is identically zero")]
    ZeroFeature { a: String, b: String, i: usize },
    #[error("enumeration of {0:.3e} sequences exceeds the oracle guard")]
    TooLarge(f64),
    #[error("unsupported model file version {0}")]
    Version(u64),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("no piece is longer than 2K+1 = {0} columns")]
    EmptyDataset(usize),
    #[error("objective increased for {0} consecutive accepted steps")]
    Divergence(usize),
    #[error("every cell is pinned; nothing to sample")]
    FullyPinned,
    #[error("constraint error: {0}")]
    Constraint(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("test-only chord set is empty; discovery is undefined")]
    EmptyReference,
    #[error("no trained model for mode {0}")]
    MissingModel(String),
    #[error("alphabet error: {0}")]
    Alphabet(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name of the variant, used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::Shape(_) => "ShapeError",
            Error::EmptyBeat { .. } => "EmptyBeatError",
            Error::Range(_) => "RangeError",
            Error::Resolution(_) => "ResolutionError",
            Error::Scope(_) => "ScopeError",
            Error::ZeroFeature { .. } => "ZeroFeatureError",
            Error::TooLarge(_) => "TooLargeError",
            Error::Version(_) => "VersionError",
            Error::Validation(_) => "ValidationError",
            Error::EmptyDataset(_) => "EmptyDatasetError",
            Error::Divergence(_) => "DivergenceError",
            Error::FullyPinned => "FullyPinnedError",
            Error::Constraint(_) => "ConstraintError",
            Error::Config(_) => "ConfigError",
            Error::EmptyReference => "EmptyReferenceError",
            Error::MissingModel(_) => "MissingModelError",
            Error::Alphabet(_) => "AlphabetError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
