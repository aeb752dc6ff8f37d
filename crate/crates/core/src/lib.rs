//! Bounds engine for two-person encouragement designs with strategic take-up.
//!
//! Observed data are joint outcomes, take-up decisions, and randomized offers
//! for pairs of individuals. Take-up is modeled as pure-strategy Nash play in
//! the game induced by the offers. The engine enumerates every latent pair
//! type consistent with that model, maps the unknown type distribution to the
//! observed cell probabilities through a sparse linear system, and solves
//! linear programs for sharp lower and upper bounds on direct, spillover, and
//! policy-targeting treatment effects, under a configurable menu of
//! restrictions on the type space.

pub mod data;
pub mod inference;
pub mod lpsolve;
pub mod program;
pub mod report;
pub mod restrictions;
pub mod simulate;
pub mod typespace;
pub mod verify;

use thiserror::Error;

/// Configure the global worker pool; zero keeps the default (all cores).
/// Later calls after the pool exists are ignored.
pub fn set_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Errors surfaced by the engine's library API.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("restriction is nonlinear in the type distribution and unsupported: {0}")]
    UnsupportedNonlinear(String),
    #[error("type space is empty after filtering")]
    EmptyTypeSpace,
    #[error("data error: {0}")]
    Data(#[from] data::DataError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
