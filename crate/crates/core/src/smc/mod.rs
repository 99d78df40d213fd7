//! Approximate Bayesian computation by sequential Monte Carlo over a menu of
//! candidate models.

mod config;
mod engine;
mod population;

pub use config::RunConfig;
pub use engine::{
    distance, hit_count, ln_particle_weight, particle_weight, run_abc_smc, run_abc_smc_with,
    ModelPool, SmcProblem,
};
pub use population::{Particle, Population};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmcError {
    #[error("no candidate models")]
    NoModels,
    #[error("observation grids do not match: {0}")]
    GridMismatch(String),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot build worker pool: {0}")]
    ThreadPool(String),
    #[error(
        "tolerance schedule too tight: generation {generation} (xi = {tolerance}) accepted {accepted} \
         particles in {attempts} attempts (rate {acceptance_rate:.2e}); per-model counts {model_counts:?}"
    )]
    ScheduleTooTight {
        generation: usize,
        tolerance: f64,
        accepted: usize,
        attempts: u64,
        acceptance_rate: f64,
        model_counts: Vec<usize>,
    },
}
