use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what}: size {size} exceeds the cap {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("polynomial is not homogeneous of degree {0}")]
    NotHomogeneous(usize),

    #[error("order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("dual-norm routes disagree: {a} vs {b}")]
    RouteDisagreement { a: f64, b: f64 },

    #[error("witness inconsistency: {0}")]
    WitnessInconsistent(String),

    #[error("not representable in this scalar type: {0}")]
    NotRepresentable(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("certified bound violated: {0}")]
    BoundViolation(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
