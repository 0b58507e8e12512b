use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("acceptance sampling failed after {attempts} attempts")]
    AcceptanceFailure { attempts: u64 },

    #[error("state space has {size} states, above the enumeration limit {limit}")]
    Capacity { size: f64, limit: usize },

    #[error(
        "eigensolver did not converge after {iterations} iterations \
         (off-diagonal norm {off_norm:e}, matrix norm {norm:e})"
    )]
    NoConvergence { iterations: usize, off_norm: f64, norm: f64 },

    #[error("discretization error: {0}")]
    Discretization(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
