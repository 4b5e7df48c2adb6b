use thiserror::Error;

/// Crate-wide error type. Structured outcomes that are not failures
/// (witness searches, reconstruction rejections) have their own enums
/// in the modules that produce them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix entries must be finite: {0}")]
    NonFinite(String),

    #[error("matrix is not Hermitian: max |m - m^dag| = {deviation:.3e} exceeds {tol:.1e}")]
    NonHermitian { deviation: f64, tol: f64 },

    #[error("matrix is not unitary: max |u^dag u - I| = {deviation:.3e} exceeds {tol:.1e}")]
    NotUnitary { deviation: f64, tol: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("trace drift {drift:.3e} exceeds {tol:.1e} at integration step {step} (t = {time})")]
    IntegrationDrift {
        step: usize,
        time: f64,
        drift: f64,
        tol: f64,
    },

    #[error(
        "positivity lost at integration step {step} (t = {time}): min eigenvalue {min_eigenvalue:.3e}"
    )]
    IntegrationPositivity {
        step: usize,
        time: f64,
        min_eigenvalue: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
