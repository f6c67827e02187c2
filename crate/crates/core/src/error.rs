use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("probabilities do not sum to one (defect {defect:e})")]
    Normalization { defect: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{discarded} of {total} quadrature orbits hit the iteration cap ({fraction:.4} > 0.01)")]
    DiscardFraction {
        discarded: usize,
        total: usize,
        fraction: f64,
    },

    #[error("cells with no quadrature mass: {0:?}")]
    EmptyCells(Vec<usize>),

    #[error("towers are built over different base systems")]
    MismatchedBase,

    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("matrix is numerically singular at z = {z} (smallest singular value bound {sigma:e}){hint}")]
    Singular {
        z: num_complex::Complex64,
        sigma: f64,
        hint: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("state space too large: {states} states exceeds limit {limit}")]
    StateExplosion { states: usize, limit: usize },

    #[error("coefficient quadrature aliasing: doubling the grid moved coefficients by {shift:e}")]
    Aliasing { shift: f64 },

    #[error("only {usable} usable points in the fit window (need 5)")]
    TooFewPoints { usable: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
