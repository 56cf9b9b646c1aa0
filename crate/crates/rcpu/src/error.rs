use std::fmt;
use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// Operand shapes do not satisfy the operation's preconditions.
    ShapeMismatch { op: &'static str, detail: String },
    /// An operation produced or was handed a NaN/Inf value.
    NonFinite { op: &'static str },
    /// An iterative solver ran out of its iteration budget.
    NoConvergence { op: &'static str, iterations: usize },
    /// A scalar or structural argument is out of its valid range.
    InvalidArgument { arg: &'static str, reason: String },
    /// Filesystem failure while reading or writing an artifact.
    Io { path: PathBuf, source: std::io::Error },
    /// A file exists but its contents do not parse as the expected format.
    Format { path: PathBuf, reason: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, detail } => {
                write!(f, "shape mismatch in {op}: {detail}")
            }
            Error::NonFinite { op } => {
                write!(f, "non-finite value encountered in {op}")
            }
            Error::NoConvergence { op, iterations } => {
                write!(f, "{op} failed to converge after {iterations} iterations")
            }
            Error::InvalidArgument { arg, reason } => {
                write!(f, "invalid argument `{arg}`: {reason}")
            }
            Error::Io { path, source } => {
                write!(f, "io error at {}: {source}", path.display())
            }
            Error::Format { path, reason } => {
                write!(f, "malformed file {}: {reason}", path.display())
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
