use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants are coarse on purpose: the CLI and the C ABI map them onto a
/// small set of exit/status codes via [`Error::kind`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("normal undefined at corner parameter {0}")]
    CornerParameter(f64),

    #[error("unsupported multiplicity: {0}")]
    UnsupportedMultiplicity(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("dimension {got} exceeds the limit {max}")]
    DimensionOverflow { got: usize, max: usize },

    #[error("inverted element {element} after mapping (signed area {area:.3e})")]
    InvertedElement { element: usize, area: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("eigenvalue window holds {found} values at t = {t}, expected {expected}")]
    WindowMultiplicity { t: f64, found: usize, expected: usize },

    #[error("branch matching failed: {0}")]
    BranchMatching(String),

    #[error("branch counts do not match: {predicted} predicted vs {measured} measured")]
    CountMismatch { predicted: usize, measured: usize },

    #[error("condition ({condition}) failed: {detail}")]
    ConditionFailed { condition: char, detail: String },

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

/// Coarse classification used for exit codes and C status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Schema,
    Numerical,
    Validation,
    Input,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. } => ErrorKind::Schema,
            Error::ConditionFailed { .. } | Error::CountMismatch { .. } => ErrorKind::Validation,
            Error::OutOfRange(_)
            | Error::InvalidInput(_)
            | Error::CornerParameter(_)
            | Error::UnsupportedMultiplicity(_)
            | Error::DimensionOverflow { .. }
            | Error::Io(_) => ErrorKind::Input,
            _ => ErrorKind::Numerical,
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
