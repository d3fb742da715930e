use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Tensor or point-set shapes do not line up.
    Dimension {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// A caller broke an operation's precondition.
    Contract(String),
    /// An argument is outside the domain of a mathematical function.
    Domain(String),
    /// NaN or infinity showed up where finite values are required.
    NonFinite(String),
    /// An iterative method ran out of iterations.
    NoConvergence { what: &'static str, iterations: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::NoConvergence { what, iterations } => {
                write!(f, "{what} did not converge after {iterations} iterations")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
