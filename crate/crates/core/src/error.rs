use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by grid construction, field operations and solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("node {node} lies outside the region where the operation is defined")]
    ExteriorAccess { node: usize },

    #[error("field is already in {0} representation")]
    Representation(&'static str),

    #[error("field shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("metric is not positive definite at node {node} (x = {coords:?})")]
    NotPositiveDefinite { node: usize, coords: Vec<f64> },

    #[error("operation needs valid data {needed} stencil passes deep but the grid margin only supports {available}")]
    MarginViolation { needed: usize, available: usize },

    #[error("non-finite value in {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },

    #[error("state violates the Dirichlet condition at node {node}")]
    Dirichlet { node: usize },

    #[error("linear solver stopped after {iterations} iterations at relative residual {residual:e}")]
    LinearStall { iterations: usize, residual: f64 },

    #[error("nonlinear iteration diverged after {iterations} iterations (residual {residual:e})")]
    Diverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("nonlinear iteration did not reach tolerance in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("fit failed: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Residual history carried by solver failures, if any.
    pub fn history(&self) -> Option<&[f64]> {
        match self {
            Error::Diverged { history, .. } | Error::NotConverged { history, .. } => {
                Some(history)
            }
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
