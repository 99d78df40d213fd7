use serde::{Deserialize, Serialize};

/// Tuning of one ABC SMC run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Strictly decreasing positive tolerances, one per generation.
    pub tolerances: Vec<f64>,
    /// Particles per generation.
    pub n_particles: usize,
    /// Replicate datasets simulated per proposal (`B_t`).
    pub replicates: u32,
    /// Internal simulator step in years.
    pub step: f64,
    pub seed: u64,
    /// Consecutive rejected attempts tolerated before giving up.
    pub max_attempts: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tolerances: vec![7.0, 6.0, 5.0, 4.0, 3.5, 3.0],
            n_particles: 2500,
            replicates: 5,
            step: 1.0 / 12.0,
            seed: 0,
            max_attempts: 1_000_000,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.tolerances.is_empty() {
            return Err("tolerance schedule is empty".into());
        }
        if self.tolerances.iter().any(|&x| !(x > 0.0) || x.is_nan()) {
            return Err("tolerances must be positive".into());
        }
        if self.tolerances.windows(2).any(|w| w[1] >= w[0]) {
            return Err("tolerance schedule must be strictly decreasing".into());
        }
        if self.n_particles == 0 {
            return Err("n_particles must be at least 1".into());
        }
        if self.replicates == 0 {
            return Err("replicates must be at least 1".into());
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err("step must be positive".into());
        }
        if self.max_attempts == 0 {
            return Err("max_attempts must be at least 1".into());
        }
        Ok(())
    }
}
