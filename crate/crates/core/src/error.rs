use std::path::PathBuf;

use thiserror::Error;

use crate::experiment::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested mode has no closed form here (e.g. off-resonant RF).
    #[error("unsupported mode: {0}")]
    Unsupported(String),

    /// A closed-form expression would divide by a near-zero denominator.
    #[error("singular denominator in {term}: |{denominator}| = {value:.3e} rad/s; evaluate this phase by quadrature")]
    SingularDenominator {
        term: &'static str,
        denominator: &'static str,
        value: f64,
    },

    /// The resonant closed forms require omega * tau = pi.
    #[error("timing is not resonant: omega*tau = {product:.12} rad (expected pi)")]
    NonResonant { product: f64 },

    /// Least-squares design matrix is too close to rank deficient.
    #[error("ill-conditioned sinusoid fit (condition number {condition:.3e}); the sweep spans {span_periods:.4} Larmor periods, use at least {suggested_periods:.4}")]
    Conditioning {
        condition: f64,
        span_periods: f64,
        suggested_periods: f64,
    },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed trace file {path}: {reason}")]
    TraceFormat { path: PathBuf, reason: String },
}

impl Error {
    /// Process exit code: 2 for configuration errors, 3 for I/O and trace
    /// files, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::TraceFormat { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {value}")))
    }
}
