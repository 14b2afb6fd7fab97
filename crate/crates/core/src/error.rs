use thiserror::Error;

/// Errors raised by samplers, the analytic engine and the reversible chain.
#[derive(Debug, Error)]
pub enum DaisError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite gradient at beta = {beta} (midpoint theta = {theta_mid:?})")]
    NonFiniteGradient { beta: f64, theta_mid: Vec<f64> },

    #[error("non-finite {quantity} at step {step}")]
    NonFinite { step: usize, quantity: &'static str },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<DaisError>,
    },

    #[error("chain {chain}: {source}")]
    Chain {
        chain: usize,
        #[source]
        source: Box<DaisError>,
    },

    #[error("covariance lost positive semi-definiteness at step {step} (min eigenvalue {min_eigenvalue:e})")]
    LostDefiniteness { step: usize, min_eigenvalue: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("information buffer exceeded its cap of {cap_bytes} bytes")]
    BufferOverflow { cap_bytes: usize },

    #[error("fixed-point overflow: {0}")]
    FixedPointOverflow(String),

    #[error("corrupted reversal state: {0}")]
    Corruption(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DaisError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DaisError::InvalidArgument(msg.into())
    }

    /// True when the error (or the error it wraps) is a numerical failure
    /// rather than a usage problem.
    pub fn is_numerical(&self) -> bool {
        match self {
            DaisError::NonFiniteGradient { .. }
            | DaisError::NonFinite { .. }
            | DaisError::LostDefiniteness { .. }
            | DaisError::NotPositiveDefinite(_)
            | DaisError::FixedPointOverflow(_) => true,
            DaisError::AtStep { source, .. } | DaisError::Chain { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, DaisError>;
