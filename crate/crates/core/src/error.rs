use thiserror::Error;

/// Errors raised by the numerical core and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// Power iteration hit its iteration cap; carries the last eigenvalue
    /// estimate.
    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate:e})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("shifting the kernel by {0} taps removes all of its mass")]
    DegenerateShift(isize),

    #[error("reference signal is identically zero")]
    ZeroReference,

    #[error("support index set is empty")]
    EmptySupport,

    #[error("infeasible spike layout: {0}")]
    Infeasible(String),

    #[error("every candidate failed: {0}")]
    AllCandidatesFailed(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the numerical routines (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::DegenerateShift(_)
        )
    }
}
