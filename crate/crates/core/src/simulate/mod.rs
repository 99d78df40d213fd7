//! Forward simulators returning latent states at the observation times.

mod ctmc;
mod ode;
mod sde;

pub use crate::linalg::{psd_sqrt, LinalgError, SymMatrix};
pub use ctmc::{simulate_ctmc, simulate_ctmc_counted, CtmcPath};
pub use ode::{simulate_euler, simulate_ode};
pub use sde::{simulate_sde, simulate_sde_with, NoiseMode};

use thiserror::Error;

use crate::dynamics::{DynamicsError, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("state became non-finite at t = {time}")]
    Divergence { time: f64 },
    #[error("invalid initial state: {0}")]
    InvalidInitialState(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("no observation times")]
    Empty,
    #[error("observation times must be strictly increasing and not before t0 (index {0})")]
    NotIncreasing(usize),
    #[error("observation time {time} is not a whole number of steps from t0")]
    OffGrid { time: f64 },
}

/// Observation times on a fixed internal step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    obs_times: Vec<f64>,
    obs_steps: Vec<u64>,
    step: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, obs_times: Vec<f64>, step: f64) -> Result<Self, GridError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(GridError::BadStep(step));
        }
        if obs_times.is_empty() {
            return Err(GridError::Empty);
        }
        let mut obs_steps = Vec::with_capacity(obs_times.len());
        let mut prev = f64::NEG_INFINITY;
        for (k, &t) in obs_times.iter().enumerate() {
            if !(t > prev && t >= t0) {
                return Err(GridError::NotIncreasing(k));
            }
            prev = t;
            let n = (t - t0) / step;
            let rounded = n.round();
            if (n - rounded).abs() > 1e-9 * (1.0 + n.abs()) {
                return Err(GridError::OffGrid { time: t });
            }
            obs_steps.push(rounded as u64);
        }
        Ok(Self {
            t0,
            obs_times,
            obs_steps,
            step,
        })
    }

    /// Annual observations `t0, t0 + 1, …` (`n` of them).
    pub fn annual(t0: f64, n: usize, step: f64) -> Result<Self, GridError> {
        Self::new(t0, (0..n).map(|k| t0 + k as f64).collect(), step)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn obs_times(&self) -> &[f64] {
        &self.obs_times
    }

    pub fn len(&self) -> usize {
        self.obs_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs_times.is_empty()
    }

    /// Same observation times with a different internal step.
    pub fn with_step(&self, step: f64) -> Result<Self, GridError> {
        Self::new(self.t0, self.obs_times.clone(), step)
    }

    pub(crate) fn obs_steps(&self) -> &[u64] {
        &self.obs_steps
    }

    #[inline]
    pub(crate) fn time_of_step(&self, k: u64) -> f64 {
        self.t0 + k as f64 * self.step
    }
}

/// Latent states at each observation time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Shared driver for the fixed-step schemes: advances `x` one step at a time
/// and records it at every observation step.
pub(crate) fn fixed_step_run<F>(
    x0: &StateVector,
    grid: &TimeGrid,
    mut advance: F,
) -> Result<Trajectory, SimError>
where
    F: FnMut(&mut StateVector, f64) -> Result<(), SimError>,
{
    let mut x = x0.clamped();
    let mut k = 0u64;
    let mut states = Vec::with_capacity(grid.len());
    for &target in grid.obs_steps() {
        while k < target {
            let t = grid.time_of_step(k);
            advance(&mut x, t)?;
            if !x.is_finite() {
                return Err(SimError::Divergence {
                    time: grid.time_of_step(k + 1),
                });
            }
            k += 1;
        }
        states.push(x);
    }
    Ok(Trajectory {
        times: grid.obs_times().to_vec(),
        states,
    })
}
