use thiserror::Error;

/// Errors raised by the grid, solver and transformation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Inputs violate a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    /// An iteration failed to converge or a scan could not bracket a root.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A transformation denominator came too close to zero.
    #[error("singular transformation: denominator {min:.3e} at x = {x:.6} ({ratio:.3e} of its maximum)")]
    Singular { x: f64, min: f64, ratio: f64 },

    /// A decaying potential holds fewer bound states than requested.
    #[error("only {found} bound state(s) below the continuum edge {edge}, {requested} requested")]
    NotEnoughStates {
        found: usize,
        requested: usize,
        edge: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
