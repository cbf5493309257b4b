use thiserror::Error;

/// Errors produced by the optimizer, certificates and experiment runners.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied inconsistent shapes, parameters or configuration.
    #[error("usage error: {0}")]
    Usage(String),

    /// A point that must lie in the effective domain of the conjugate does not.
    #[error("domain violation: distance {distance:e} exceeds tolerance {tol:e}")]
    DomainViolation { distance: f64, tol: f64 },

    /// A non-finite value appeared in a state, gradient or integrator stage.
    #[error("numeric failure at step {step}: {message}")]
    Numeric { step: u64, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numeric(step: u64, msg: impl Into<String>) -> Self {
        Error::Numeric {
            step,
            message: msg.into(),
        }
    }

    /// Process exit status: 2 for configuration and input errors, 3 for
    /// numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Numeric { .. } | Error::DomainViolation { .. } => 3,
            _ => 2,
        }
    }
}
