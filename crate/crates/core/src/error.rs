use thiserror::Error;

/// Errors raised by the geometry kernels and experiment drivers.
#[derive(Debug, Error)]
pub enum GeoError {
    /// An argument lies outside the domain of the operation.
    #[error("input domain error: {0}")]
    Domain(String),

    /// Orbit enumeration hit its configured node budget before closing.
    #[error("orbit enumeration exceeded the node budget of {budget} elements (radius {radius})")]
    Budget { budget: usize, radius: f64 },

    /// A local-maximum search ran out of iterations.
    #[error(
        "pattern search did not converge within {iterations} iterations \
         (step {step:e}, best value {best_value}, best pair {best_p1:?} / {best_p2:?})"
    )]
    NonConvergence {
        iterations: usize,
        step: f64,
        best_value: f64,
        best_p1: Vec<f64>,
        best_p2: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, GeoError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(GeoError::Domain(msg.into()))
}
