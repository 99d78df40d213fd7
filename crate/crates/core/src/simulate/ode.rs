use crate::dynamics::{drift, drift_unchecked, DynParams, EnvSchedule, StateVector, Transmission};

use super::{fixed_step_run, SimError, TimeGrid, Trajectory};

/// Classical fourth-order Runge–Kutta at the grid step. `(a, m)` are read at
/// the midpoint of each step and held constant across its stages.
pub fn simulate_ode(
    kind: Transmission,
    p: &DynParams,
    x0: &StateVector,
    grid: &TimeGrid,
    env: &EnvSchedule,
) -> Result<Trajectory, SimError> {
    drift(kind, x0, p, &env.at(grid.t0()))?;
    let h = grid.step();
    fixed_step_run(x0, grid, |x, t| {
        let e = env.at(t + 0.5 * h);
        let k1 = drift_unchecked(x, p, &e);
        let k2 = drift_unchecked(&offset(x, &k1, 0.5 * h), p, &e);
        let k3 = drift_unchecked(&offset(x, &k2, 0.5 * h), p, &e);
        let k4 = drift_unchecked(&offset(x, &k3, h), p, &e);
        let (s1, s2, s3, s4) = (k1.as_slice(), k2.as_slice(), k3.as_slice(), k4.as_slice());
        for (j, v) in x.as_mut_slice().iter_mut().enumerate() {
            *v += h / 6.0 * (s1[j] + 2.0 * s2[j] + 2.0 * s3[j] + s4[j]);
        }
        x.clamp_nonnegative();
        Ok(())
    })
}

/// Forward Euler at the grid step, clamping to zero after each step.
pub fn simulate_euler(
    kind: Transmission,
    p: &DynParams,
    x0: &StateVector,
    grid: &TimeGrid,
    env: &EnvSchedule,
) -> Result<Trajectory, SimError> {
    drift(kind, x0, p, &env.at(grid.t0()))?;
    let h = grid.step();
    fixed_step_run(x0, grid, |x, t| {
        let f = drift_unchecked(x, p, &env.at(t + 0.5 * h));
        for (v, d) in x.as_mut_slice().iter_mut().zip(f.as_slice()) {
            *v += d * h;
        }
        x.clamp_nonnegative();
        Ok(())
    })
}

#[inline]
fn offset(x: &StateVector, k: &StateVector, h: f64) -> StateVector {
    let mut out = *x;
    for (v, d) in out.as_mut_slice().iter_mut().zip(k.as_slice()) {
        *v += h * d;
    }
    out
}
