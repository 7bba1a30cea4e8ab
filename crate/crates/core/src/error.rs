use alloc::string::String;
use num_complex::Complex64;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("singular matrix at pivot {pivot} (a = {a}, b = {b}, p = {p}, dt = {dt})")]
    Singular {
        pivot: usize,
        a: f64,
        b: f64,
        p: Complex64,
        dt: f64,
    },

    #[error("control mode mismatch: expected {expected} control")]
    WrongControlMode { expected: &'static str },

    #[error("not a descent direction: directional derivative {slope:e} >= 0")]
    NotDescent { slope: f64 },

    #[error("line search failed after {backtracks} backtracks")]
    LineSearchFailure { backtracks: usize },

    #[error("{0} has zero norm")]
    ZeroNorm(&'static str),

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// First non-finite entry, if any.
pub(crate) fn check_finite(values: &[Complex64]) -> Result<()> {
    match values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}
