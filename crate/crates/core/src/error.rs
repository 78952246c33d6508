use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A boundary curve or domain failed one of its construction invariants.
    #[error("invalid domain: {invariant} ({detail})")]
    Construction {
        invariant: &'static str,
        detail: String,
    },

    /// A point or parameter lies outside the region where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole at z = {z}")]
    Pole { z: Complex64 },

    #[error("nearest-point search did not converge (best residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },

    /// The discretization cannot resolve the requested evaluation.
    #[error("insufficient resolution: {detail}")]
    Resolution { detail: String },

    /// Evaluation point too close to the boundary for the configured node count.
    #[error("point {z} is within the near-boundary band of the discretization; use at least N = {min_nodes} nodes per curve or a graded discretization")]
    Degraded { z: Complex64, min_nodes: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A checked mathematical invariant failed; carries a witness.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn construction(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Construction {
            invariant,
            detail: detail.into(),
        }
    }
}
