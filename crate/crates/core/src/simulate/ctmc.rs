//! Gillespie direct method for the direct-transmission CTMC.
//!
//! Random draws per iteration: one exponential waiting time, then (only if
//! the event lands before the next stop) one uniform for event selection.
//! A stop is the next observation time or the next change of `(a, m)`; a
//! waiting time that crosses a stop is discarded and redrawn from the stop,
//! which is exact because the rates are constant between stops.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::dynamics::{
    direct_rates, DynParams, EnvSchedule, StateVector, Transmission, DIRECT_EVENT_DELTAS,
};
use crate::rng::SimRng;

use super::{SimError, TimeGrid, Trajectory};

/// Trajectory plus cumulative event counts at each observation time, in
/// [`DIRECT_EVENT_DELTAS`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcPath {
    pub trajectory: Trajectory,
    pub event_counts: Vec<[u64; 5]>,
}

pub fn simulate_ctmc(
    p: &DynParams,
    x0: &StateVector,
    grid: &TimeGrid,
    env: &EnvSchedule,
    rng: &mut SimRng,
) -> Result<Trajectory, SimError> {
    simulate_ctmc_counted(p, x0, grid, env, rng).map(|path| path.trajectory)
}

pub fn simulate_ctmc_counted(
    p: &DynParams,
    x0: &StateVector,
    grid: &TimeGrid,
    env: &EnvSchedule,
    rng: &mut SimRng,
) -> Result<CtmcPath, SimError> {
    if x0.transmission() != Transmission::Direct {
        return Err(crate::dynamics::DynamicsError::UnsupportedModel(x0.transmission()).into());
    }
    let mut state = [0i64; 3];
    for (slot, &v) in state.iter_mut().zip(x0.as_slice()) {
        if !(v >= 0.0 && v.fract() == 0.0 && v < 1e15) {
            return Err(SimError::InvalidInitialState(format!(
                "CTMC needs nonnegative integer counts, got {v}"
            )));
        }
        *slot = v as i64;
    }

    let mut counts = [0u64; 5];
    let mut t = grid.t0();
    let mut states = Vec::with_capacity(grid.len());
    let mut event_counts = Vec::with_capacity(grid.len());

    for &obs in grid.obs_times() {
        while t < obs {
            let stop = env.next_change(t).map_or(obs, |c| c.min(obs));
            let rates = direct_rates(state[0] as f64, state[1] as f64, p, &env.at(t));
            let total: f64 = rates.iter().sum();
            if !(total > 0.0) {
                t = stop;
                continue;
            }
            let wait: f64 = Exp1.sample(rng);
            let next = t + wait / total;
            if next > stop {
                t = stop;
                continue;
            }
            t = next;
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (k, &r) in rates.iter().enumerate() {
                if r > 0.0 {
                    chosen = Some(k);
                    acc += r;
                    if target < acc {
                        break;
                    }
                }
            }
            // total > 0 guarantees some positive rate.
            let k = chosen.expect("positive total rate");
            for (s, d) in state.iter_mut().zip(DIRECT_EVENT_DELTAS[k]) {
                *s += d;
            }
            counts[k] += 1;
        }
        states.push(StateVector::direct(
            state[0] as f64,
            state[1] as f64,
            state[2] as f64,
        ));
        event_counts.push(counts);
    }

    Ok(CtmcPath {
        trajectory: Trajectory {
            times: grid.obs_times().to_vec(),
            states,
        },
        event_counts,
    })
}
