use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A polynomial or Krylov expansion hit its order cap before reaching the
    /// requested tolerance.
    #[error("propagation did not converge at order {order} (residual {residual:e}, tolerance {tolerance:e})")]
    Convergence {
        order: usize,
        residual: f64,
        tolerance: f64,
    },

    /// Propagation failed partway through a trajectory.
    #[error("propagation failed at t = {time}: {source}")]
    Trajectory {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerical core (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Convergence { .. } => true,
            Error::Trajectory { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Residual carried by a convergence failure, if any.
    pub fn residual(&self) -> Option<f64> {
        match self {
            Error::Convergence { residual, .. } => Some(*residual),
            Error::Trajectory { source, .. } => source.residual(),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
