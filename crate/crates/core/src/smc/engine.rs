//! ABC SMC with joint model selection.
//!
//! Attempt `k` of generation `t` draws from its own random stream, so the
//! outcome of every attempt is a pure function of `(seed, t, k)`. Attempts
//! are evaluated in parallel batches and the first `N` acceptances in attempt
//! order form the generation, which makes the result independent of the
//! worker count.

use rand::Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::distributions::{
    ln_prior_density, prior_sample, proposal_density, proposal_sample, ParamVector, PriorSpec,
    ProposalSpec,
};
use crate::models::{EpidemicContext, ModelSpec};
use crate::observe::ObservedSeries;
use crate::rng::{attempt_stream, SimRng};

use super::{Particle, Population, RunConfig, SmcError};

/// Everything an SMC run conditions on.
#[derive(Debug, Clone)]
pub struct SmcProblem {
    pub models: Vec<ModelSpec>,
    pub priors: PriorSpec,
    pub proposals: ProposalSpec,
    pub observed: Vec<ObservedSeries>,
    pub contexts: Vec<EpidemicContext>,
}

impl SmcProblem {
    pub fn new(
        models: Vec<ModelSpec>,
        priors: PriorSpec,
        proposals: ProposalSpec,
        dataset: &Dataset,
        step: f64,
    ) -> Result<Self, SmcError> {
        if models.is_empty() {
            return Err(SmcError::NoModels);
        }
        if dataset.epidemics.is_empty() {
            return Err(SmcError::GridMismatch("dataset has no epidemics".into()));
        }
        let contexts = dataset
            .contexts(step)
            .map_err(|e| SmcError::GridMismatch(e.to_string()))?;
        Ok(Self {
            models,
            priors,
            proposals,
            observed: dataset.observed(),
            contexts,
        })
    }

    pub fn n_epidemics(&self) -> usize {
        self.contexts.len()
    }

    pub fn n_obs(&self) -> usize {
        self.observed.iter().map(|o| o.len()).sum()
    }
}

/// Mean absolute difference of observed counts pooled over all epidemics.
pub fn distance(sim: &[ObservedSeries], obs: &[ObservedSeries]) -> Result<f64, SmcError> {
    if sim.len() != obs.len() {
        return Err(SmcError::GridMismatch(format!(
            "{} simulated epidemics vs {} observed",
            sim.len(),
            obs.len()
        )));
    }
    for (k, (s, o)) in sim.iter().zip(obs).enumerate() {
        if s.times != o.times {
            return Err(SmcError::GridMismatch(format!(
                "epidemic {} observation times differ",
                k + 1
            )));
        }
    }
    Ok(distance_unchecked(sim, obs))
}

#[inline]
fn distance_unchecked(sim: &[ObservedSeries], obs: &[ObservedSeries]) -> f64 {
    // Counts from near-divergent proposals can approach u64::MAX.
    let mut total = 0u128;
    let mut n = 0usize;
    for (s, o) in sim.iter().zip(obs) {
        for (&a, &b) in s.c_tilde.iter().zip(&o.c_tilde) {
            total += u128::from(a.abs_diff(b));
        }
        n += o.len();
    }
    total as f64 / n as f64
}

/// Number of the `B_t` simulated datasets within `xi` of the observations.
///
/// Deterministic process models simulate the latent path once and redraw
/// only the observation layer. A diverging simulation is a miss. The random
/// stream is consumed identically for every `xi`.
pub fn hit_count(
    model: &ModelSpec,
    theta: &ParamVector,
    problem: &SmcProblem,
    replicates: u32,
    xi: f64,
    rng: &mut SimRng,
) -> u32 {
    let cached = if model.process.is_deterministic() {
        match model.simulate_latent(theta, &problem.contexts, rng) {
            Ok(latent) => Some(latent),
            Err(_) => return 0,
        }
    } else {
        None
    };
    let mut hits = 0;
    for _ in 0..replicates {
        let sim = match &cached {
            Some(latent) => model.observe_all(latent, rng),
            None => match model.simulate_dataset(theta, &problem.contexts, rng) {
                Ok(sim) => sim,
                Err(_) => continue,
            },
        };
        if distance_unchecked(&sim, &problem.observed) <= xi {
            hits += 1;
        }
    }
    hits
}

/// Weighted previous-generation particles of one model.
#[derive(Debug, Clone, Default)]
pub struct ModelPool {
    thetas: Vec<ParamVector>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ModelPool {
    pub fn from_population(pop: &Population, model: usize) -> Self {
        let mut pool = Self::default();
        let mut acc = 0.0;
        for p in pop.of_model(model) {
            acc += p.weight;
            pool.thetas.push(p.theta.clone());
            pool.weights.push(p.weight);
            pool.cumulative.push(acc);
        }
        pool
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    fn pick(&self, rng: &mut SimRng) -> &ParamVector {
        let total = *self.cumulative.last().expect("non-empty pool");
        let u = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= u);
        &self.thetas[k.min(self.thetas.len() - 1)]
    }

    /// `Σ_j ω_j q(θ | θ_j)`.
    fn kernel_mixture(&self, spec: &ProposalSpec, theta: &ParamVector) -> f64 {
        self.thetas
            .iter()
            .zip(&self.weights)
            .map(|(from, &w)| w * proposal_density(spec, theta, from))
            .sum()
    }
}

/// Log importance weight of an accepted proposal. Generation 1 uses `b_t`;
/// later generations use `π(θ)·b_t / Σ_j ω_j q(θ | θ_j)` over the previous
/// particles of the same model. `None` if that model had no particles or
/// the mixture density vanishes.
pub fn ln_particle_weight(
    generation: usize,
    theta: &ParamVector,
    hits: u32,
    pool: Option<&ModelPool>,
    priors: &PriorSpec,
    proposals: &ProposalSpec,
) -> Option<f64> {
    debug_assert!(hits >= 1);
    if generation <= 1 {
        return Some((hits as f64).ln());
    }
    let pool = pool.filter(|p| !p.is_empty())?;
    let denom = pool.kernel_mixture(proposals, theta);
    if !(denom > 0.0) {
        return None;
    }
    Some(ln_prior_density(priors, theta) + (hits as f64).ln() - denom.ln())
}

/// Unnormalized weight for a particle of `model` against `prev`.
pub fn particle_weight(
    generation: usize,
    theta: &ParamVector,
    hits: u32,
    prev: Option<&Population>,
    model: usize,
    priors: &PriorSpec,
    proposals: &ProposalSpec,
) -> Option<f64> {
    let pool = prev.map(|p| ModelPool::from_population(p, model));
    ln_particle_weight(generation, theta, hits, pool.as_ref(), priors, proposals).map(f64::exp)
}

enum Outcome {
    Accepted(Particle),
    Rejected,
}

fn attempt(
    problem: &SmcProblem,
    cfg: &RunConfig,
    generation: usize,
    pools: Option<&[ModelPool]>,
    k: u64,
) -> Outcome {
    let mut rng = attempt_stream(cfg.seed, generation as u64, k);
    let m = rng.random_range(0..problem.models.len());
    let model = &problem.models[m];
    let layout = model.layout(problem.n_epidemics());

    let theta = match pools {
        None => prior_sample(&problem.priors, layout, &mut rng),
        Some(pools) => {
            let pool = &pools[m];
            if pool.is_empty() {
                return Outcome::Rejected;
            }
            let star = pool.pick(&mut rng);
            proposal_sample(&problem.proposals, star, &mut rng)
        }
    };
    if ln_prior_density(&problem.priors, &theta) == f64::NEG_INFINITY {
        return Outcome::Rejected;
    }
    let xi = cfg.tolerances[generation - 1];
    let hits = hit_count(model, &theta, problem, cfg.replicates, xi, &mut rng);
    if hits == 0 {
        return Outcome::Rejected;
    }
    let Some(ln_w) = ln_particle_weight(
        generation,
        &theta,
        hits,
        pools.map(|p| &p[m]),
        &problem.priors,
        &problem.proposals,
    ) else {
        return Outcome::Rejected;
    };
    Outcome::Accepted(Particle {
        model: m + 1,
        theta,
        hits,
        ln_raw_weight: ln_w,
        weight: 0.0,
    })
}

fn run_generation(
    problem: &SmcProblem,
    cfg: &RunConfig,
    generation: usize,
    prev: Option<&Population>,
) -> Result<Population, SmcError> {
    let pools: Option<Vec<ModelPool>> = prev.map(|p| {
        (1..=problem.models.len())
            .map(|m| ModelPool::from_population(p, m))
            .collect()
    });
    let n = cfg.n_particles;
    let workers = rayon::current_num_threads().max(1) as u64;
    let mut accepted: Vec<Particle> = Vec::with_capacity(n);
    let mut next: u64 = 0;
    let mut since_accept: u64 = 0;
    let mut attempts: Option<u64> = None;

    while attempts.is_none() {
        // Batch size only affects wasted work, never the result.
        let rate = (accepted.len() as f64 + 1.0) / (next as f64 + 1.0);
        let want = ((n - accepted.len()) as f64 / rate * 1.2).ceil() as u64;
        let batch = want.clamp(16 * workers, 50_000 * workers);
        let range = next..next + batch;
        let outcomes: Vec<Outcome> = range
            .clone()
            .into_par_iter()
            .map(|k| attempt(problem, cfg, generation, pools.as_deref(), k))
            .collect();
        for (k, outcome) in range.zip(outcomes) {
            match outcome {
                Outcome::Accepted(p) => {
                    accepted.push(p);
                    since_accept = 0;
                    if accepted.len() == n {
                        attempts = Some(k + 1);
                        break;
                    }
                }
                Outcome::Rejected => {
                    since_accept += 1;
                    if since_accept >= cfg.max_attempts {
                        let mut counts = vec![0; problem.models.len()];
                        for p in &accepted {
                            counts[p.model - 1] += 1;
                        }
                        return Err(SmcError::ScheduleTooTight {
                            generation,
                            tolerance: cfg.tolerances[generation - 1],
                            accepted: accepted.len(),
                            attempts: k + 1,
                            acceptance_rate: accepted.len() as f64 / (k + 1) as f64,
                            model_counts: counts,
                        });
                    }
                }
            }
        }
        next += batch;
    }

    let mut pop = Population {
        generation,
        tolerance: cfg.tolerances[generation - 1],
        particles: accepted,
        attempts: attempts.expect("loop exits with attempts set"),
        n_models: problem.models.len(),
    };
    pop.normalize();
    Ok(pop)
}

/// Runs every generation of the tolerance schedule.
pub fn run_abc_smc(cfg: &RunConfig, problem: &SmcProblem) -> Result<Vec<Population>, SmcError> {
    run_abc_smc_with(cfg, problem, |_| {})
}

/// As [`run_abc_smc`], calling `on_generation` after each generation.
pub fn run_abc_smc_with<F>(
    cfg: &RunConfig,
    problem: &SmcProblem,
    mut on_generation: F,
) -> Result<Vec<Population>, SmcError>
where
    F: FnMut(&Population),
{
    cfg.validate().map_err(SmcError::InvalidConfig)?;
    if problem.models.is_empty() {
        return Err(SmcError::NoModels);
    }
    if problem.observed.len() != problem.contexts.len() {
        return Err(SmcError::GridMismatch(
            "observed series and grids disagree".into(),
        ));
    }
    for (o, c) in problem.observed.iter().zip(&problem.contexts) {
        if o.times_f64() != c.grid.obs_times() {
            return Err(SmcError::GridMismatch(
                "observed times differ from simulation grid".into(),
            ));
        }
    }

    let pool = match cfg.threads {
        0 => None,
        n => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SmcError::ThreadPool(e.to_string()))?,
        ),
    };
    let mut pops: Vec<Population> = Vec::with_capacity(cfg.tolerances.len());
    for generation in 1..=cfg.tolerances.len() {
        let step = || run_generation(problem, cfg, generation, pops.last());
        let pop = match &pool {
            Some(pool) => pool.install(step)?,
            None => step()?,
        };
        on_generation(&pop);
        pops.push(pop);
    }
    Ok(pops)
}
