//! Crate-wide error type.

use std::fmt;

/// Errors produced anywhere in the crate.
#[derive(Debug)]
pub enum Error {
    /// Tensor shapes do not fit the operation; the message names both shapes.
    Dimension { op: &'static str, detail: String },
    /// A parameter combination was rejected at construction time.
    Config(String),
    /// Caller-supplied data is invalid (bad label, empty batch, ...).
    Input(String),
    /// An API was used outside its contract (non-scalar backward seed,
    /// stepping parameters that carry no gradient buffer, ...).
    Usage(String),
    /// A computation produced NaN or infinity; values must stay finite.
    NonFinite { op: String },
    /// A feature file failed to parse; `line` is 1-based.
    Parse { line: usize, detail: String },
    /// Paired modality files disagree; names the first offending sample id.
    Pairing { detail: String },
    /// A checkpoint is malformed; `offset` is the byte position of the defect.
    Format { offset: u64, detail: String },
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dimension { op, detail } => write!(f, "{op}: dimension error: {detail}"),
            Self::Config(detail) => write!(f, "configuration error: {detail}"),
            Self::Input(detail) => write!(f, "input error: {detail}"),
            Self::Usage(detail) => write!(f, "usage error: {detail}"),
            Self::NonFinite { op } => {
                write!(f, "{op}: produced a non-finite value (NaN or infinity)")
            }
            Self::Parse { line, detail } => write!(f, "parse error at line {line}: {detail}"),
            Self::Pairing { detail } => write!(f, "pairing error: {detail}"),
            Self::Format { offset, detail } => {
                write!(f, "checkpoint format error at byte {offset}: {detail}")
            }
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Formats dims like `[4, 6]` for error messages.
pub(crate) fn shape_str(dims: &[usize]) -> String {
    format!("{dims:?}")
}
