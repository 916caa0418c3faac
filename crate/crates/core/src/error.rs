use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Fock space dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sideband order |m| = {0} exceeds the supported maximum of 4")]
    SidebandOrder(i32),

    #[error("Liouvillian kernel is degenerate ({0} eigenvalues below threshold)")]
    DegenerateKernel(usize),

    #[error("Liouvillian has no kernel: smallest eigenvalue magnitude {magnitude:e} exceeds {threshold:e}")]
    NoKernel { magnitude: f64, threshold: f64 },

    #[error("kernel vector has vanishing trace")]
    TraceZeroKernel,

    #[error("positivity violated: minimum eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("vanishing population difference n_A - n_C = {0:e}")]
    ChiDenominator(f64),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
