//! Euler–Maruyama for the diffusion approximations.
//!
//! Each step evaluates drift `f` and covariance `Σ` at the clamped state,
//! draws `η ~ N(0, I)` component by component in state order, and sets
//! `x ← max(0, x + f·δ + √Σ·√δ·η)`. `C` is not forced to be monotone.

use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{
    diffusion_cov_unchecked, drift, drift_unchecked, DynParams, EnvSchedule, StateVector,
    Transmission,
};
use crate::linalg::psd_sqrt;
use crate::rng::SimRng;

use super::{fixed_step_run, SimError, TimeGrid, Trajectory};

/// Whether the Wiener term is applied. `Zero` exists for testing the
/// noise-free limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Full,
    Zero,
}

pub fn simulate_sde(
    kind: Transmission,
    p: &DynParams,
    x0: &StateVector,
    grid: &TimeGrid,
    env: &EnvSchedule,
    rng: &mut SimRng,
) -> Result<Trajectory, SimError> {
    simulate_sde_with(kind, p, x0, grid, env, rng, NoiseMode::Full)
}

pub fn simulate_sde_with(
    kind: Transmission,
    p: &DynParams,
    x0: &StateVector,
    grid: &TimeGrid,
    env: &EnvSchedule,
    rng: &mut SimRng,
    noise: NoiseMode,
) -> Result<Trajectory, SimError> {
    drift(kind, x0, p, &env.at(grid.t0()))?;
    let h = grid.step();
    let sqrt_h = h.sqrt();
    let n = kind.dim();
    fixed_step_run(x0, grid, |x, t| {
        let e = env.at(t + 0.5 * h);
        let f = drift_unchecked(x, p, &e);
        match noise {
            NoiseMode::Zero => {
                for (v, d) in x.as_mut_slice().iter_mut().zip(f.as_slice()) {
                    *v += d * h;
                }
            }
            NoiseMode::Full => {
                let b = psd_sqrt(&diffusion_cov_unchecked(x, p, &e))?;
                let mut eta = [0.0; 4];
                for z in eta.iter_mut().take(n) {
                    *z = StandardNormal.sample(rng);
                }
                let mut kick = [0.0; 4];
                b.mul_vec(&eta, &mut kick);
                for ((v, d), w) in x.as_mut_slice().iter_mut().zip(f.as_slice()).zip(kick) {
                    *v += d * h + sqrt_h * w;
                }
            }
        }
        x.clamp_nonnegative();
        Ok(())
    })
}
