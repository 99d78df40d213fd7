//! Likelihood-free parameter inference and model selection for epidemic
//! process models (ODE, CTMC and SDE) observed through count data models,
//! using approximate Bayesian computation with sequential Monte Carlo.

pub mod analysis;
pub mod data;
pub mod distributions;
pub mod dynamics;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod observe;
pub mod output;
pub mod rng;
pub mod simulate;
pub mod smc;

pub use data::{Dataset, EpidemicData};
pub use distributions::{ParamVector, PriorSpec, ProposalSpec};
pub use dynamics::{DynParams, Environment, StateVector, Transmission};
pub use models::{ModelRegistry, ModelSpec};
pub use smc::{run_abc_smc, Population, RunConfig, SmcProblem};
