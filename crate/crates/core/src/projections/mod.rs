//! Euclidean projections onto the cache polytopes.
//!
//! * [`project_capped_simplex`]: `{x ∈ [0,1]^N : Σx ≤ C}`, exact breakpoint search.
//! * [`project_weighted_capped_simplex`]: `{x ∈ [0,1]^N : Σ s_i x_i ≤ C}`, bisection.
//! * [`project_two_simplex`]: the probability simplex in two dimensions.
//! * [`dykstra_project_bipartite`]: the LP relaxation of the joint
//!   caching/routing polytope of a bipartite cache network.

mod bipartite;
mod simplex;

pub use bipartite::{
    dykstra_project_bipartite, BipartitePoint, BipartitePolytopeSpec, DykstraOutcome, DYKSTRA_MAX_ITERS, DYKSTRA_TOL,
};
pub use simplex::{
    project_capped_simplex, project_capped_simplex_with_multiplier, project_two_simplex,
    project_weighted_capped_simplex,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("input coordinate {index} is not finite")]
    NonFinite { index: usize },
    #[error("capacity must be positive and finite, got {0}")]
    InvalidCapacity(f64),
    #[error("size of item {index} is {size}, must be positive and finite")]
    NonPositiveSize { index: usize, size: f64 },
    #[error("expected {expected} coordinates, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("dykstra did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

fn check_finite(z: &[f64]) -> Result<(), ProjectionError> {
    match z.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(ProjectionError::NonFinite { index }),
        None => Ok(()),
    }
}
