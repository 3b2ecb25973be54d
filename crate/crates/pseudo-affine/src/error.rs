use thiserror::Error;

/// Coarse classification used by callers that map failures to exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Input outside the mathematical domain of an operation.
    Domain,
    /// A requested accuracy or size cannot be reached with the available budget.
    Capacity,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("lambda + theta_{letter}({suffix}) = {value} is outside (0, 1)")]
    Inadmissible { letter: u8, suffix: String, value: f64 },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("convergence not certified: {0}")]
    NotCertified(String),

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("depth {requested} exceeds table depth {available}")]
    DepthExceeded { requested: usize, available: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) | Error::Inadmissible { .. } | Error::Capability(_) | Error::Parse(_) => ErrorKind::Domain,
            Error::Capacity(_) | Error::NotCertified(_) | Error::NoConvergence { .. } | Error::DepthExceeded { .. } => {
                ErrorKind::Capacity
            }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
