//! Library error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid element: {0}")]
    InvalidElement(String),

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("penalty computation failed: {0}")]
    InvalidPenalty(String),

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("matrix is not symmetric positive definite (pivot {pivot})")]
    NotSpd { pivot: usize },

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("solution residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("point ({0}, {1}) lies outside the mesh")]
    PointOutsideDomain(f64, f64),

    #[error("fixed-point iteration did not converge after {iterations} iterations (dT {dt_inf:.3e}, dNu {dnu:.3e})")]
    PicardDiverged { iterations: usize, dt_inf: f64, dnu: f64 },

    #[error("field value is not finite at iteration {0}")]
    NonFiniteField(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
