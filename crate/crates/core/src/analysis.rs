//! Posterior summaries: model probabilities, Bayes factors, modes, HPD
//! intervals and goodness-of-fit ensembles.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{ParamId, ParamVector};
use crate::models::{EpidemicContext, ModelSpec};
use crate::observe::ObservedSeries;
use crate::rng::SimRng;
use crate::simulate::SimError;
use crate::smc::Population;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("no samples with positive weight")]
    NoWeight,
    #[error("weights must be finite and nonnegative")]
    BadWeight,
    #[error("level must lie strictly between 0 and 1, got {0}")]
    BadLevel(f64),
    #[error("model prior probabilities must be positive")]
    BadPrior,
    #[error("Bayes factor undefined: both posterior probabilities are zero")]
    Undefined,
}

/// Posterior model probabilities, indexed from 0 for model 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelPosterior {
    pub probs: Vec<f64>,
}

impl ModelPosterior {
    /// Best model as `(1-based index, probability)`; ties go to the lower index.
    pub fn best(&self) -> (usize, f64) {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = k;
            }
        }
        (best + 1, self.probs[best])
    }

    /// 1-based rank of `model` ordering by probability, then by index.
    pub fn rank_of(&self, model: usize) -> usize {
        let p = self.probs[model - 1];
        1 + self
            .probs
            .iter()
            .enumerate()
            .filter(|&(k, &q)| q > p || (q == p && k + 1 < model))
            .count()
    }

    /// Model indices ordered from most to least probable.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (1..=self.probs.len()).collect();
        idx.sort_by(|&a, &b| {
            self.probs[b - 1]
                .partial_cmp(&self.probs[a - 1])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Proportion of particles carrying each model.
pub fn model_probs(pop: &Population) -> Result<ModelPosterior, AnalysisError> {
    if pop.is_empty() {
        return Err(AnalysisError::EmptyPopulation);
    }
    let n = pop.len() as f64;
    Ok(ModelPosterior {
        probs: pop
            .model_counts()
            .into_iter()
            .map(|c| c as f64 / n)
            .collect(),
    })
}

/// Strength-of-evidence bins for a Bayes factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Evidence {
    /// Below 1: the evidence favors the second model.
    Negative,
    Weak,
    Positive,
    Strong,
    VeryStrong,
}

impl Evidence {
    /// `[1, 3)` weak, `[3, 20)` positive, `[20, 150]` strong, above 150 very strong.
    pub fn classify(bf: f64) -> Self {
        if bf < 1.0 {
            Evidence::Negative
        } else if bf < 3.0 {
            Evidence::Weak
        } else if bf < 20.0 {
            Evidence::Positive
        } else if bf <= 150.0 {
            Evidence::Strong
        } else {
            Evidence::VeryStrong
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Evidence::Negative => "Negative",
            Evidence::Weak => "Weak",
            Evidence::Positive => "Positive",
            Evidence::Strong => "Strong",
            Evidence::VeryStrong => "Very Strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesFactor {
    /// `+∞` when the second model has zero posterior probability.
    pub value: f64,
    pub evidence: Evidence,
}

impl BayesFactor {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// Posterior odds over prior odds of model 1 against model 2.
pub fn bayes_factor(
    p1: f64,
    p2: f64,
    prior1: f64,
    prior2: f64,
) -> Result<BayesFactor, AnalysisError> {
    if !(prior1 > 0.0 && prior2 > 0.0) {
        return Err(AnalysisError::BadPrior);
    }
    if p2 == 0.0 {
        if p1 == 0.0 {
            return Err(AnalysisError::Undefined);
        }
        return Ok(BayesFactor {
            value: f64::INFINITY,
            evidence: Evidence::VeryStrong,
        });
    }
    let value = (p1 / p2) / (prior1 / prior2);
    Ok(BayesFactor {
        value,
        evidence: Evidence::classify(value),
    })
}

fn check_weights(samples: &[(f64, f64)]) -> Result<f64, AnalysisError> {
    let mut total = 0.0;
    for &(v, w) in samples {
        if !w.is_finite() || w < 0.0 || !v.is_finite() {
            return Err(AnalysisError::BadWeight);
        }
        total += w;
    }
    if total > 0.0 {
        Ok(total)
    } else {
        Err(AnalysisError::NoWeight)
    }
}

/// Distinct values with their summed weight, sorted ascending. Zero-weight
/// samples are dropped.
fn atoms(samples: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> = samples.iter().copied().filter(|&(_, w)| w > 0.0).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (v, w) in sorted {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => out.push((v, w)),
        }
    }
    out
}

/// Shortest interval `[x_i, x_j]` between sample values whose enclosed
/// weight is at least `level` of the total. Ties go to the lower left end.
pub fn hpd_interval(samples: &[(f64, f64)], level: f64) -> Result<(f64, f64), AnalysisError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(AnalysisError::BadLevel(level));
    }
    let total = check_weights(samples)?;
    let atoms = atoms(samples);
    let target = level * total - 1e-12 * total;

    let mut prefix = Vec::with_capacity(atoms.len() + 1);
    prefix.push(0.0);
    for &(_, w) in &atoms {
        prefix.push(prefix.last().unwrap() + w);
    }

    let n = atoms.len();
    let mut best: Option<(usize, usize)> = None;
    let mut j = 0;
    for i in 0..n {
        j = j.max(i);
        while j < n && prefix[j + 1] - prefix[i] < target {
            j += 1;
        }
        if j == n {
            break;
        }
        let width = atoms[j].0 - atoms[i].0;
        match best {
            Some((bi, bj)) if atoms[bj].0 - atoms[bi].0 <= width => {}
            _ => best = Some((i, j)),
        }
    }
    let (i, j) = best.expect("the full range always qualifies");
    Ok((atoms[i].0, atoms[j].0))
}

/// Whether a marginal is treated as continuous or integer-valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Continuous,
    Discrete,
}

pub const KDE_GRID_POINTS: usize = 512;

/// Weighted sample quantile by cumulative weight over sorted atoms.
fn weighted_quantile(atoms: &[(f64, f64)], total: f64, q: f64) -> f64 {
    let target = q * total;
    let mut acc = 0.0;
    for &(v, w) in atoms {
        acc += w;
        if acc >= target {
            return v;
        }
    }
    atoms.last().map(|a| a.0).unwrap_or(f64::NAN)
}

/// Silverman bandwidth using the weighted spread and the effective sample
/// size `(Σw)² / Σw²`.
pub fn silverman_bandwidth(samples: &[(f64, f64)]) -> Result<f64, AnalysisError> {
    let total = check_weights(samples)?;
    let mean = samples.iter().map(|&(v, w)| v * w).sum::<f64>() / total;
    let var = samples
        .iter()
        .map(|&(v, w)| w * (v - mean).powi(2))
        .sum::<f64>()
        / total;
    let sd = var.sqrt();
    let atoms = atoms(samples);
    let iqr = weighted_quantile(&atoms, total, 0.75) - weighted_quantile(&atoms, total, 0.25);
    let n_eff = total * total / samples.iter().map(|&(_, w)| w * w).sum::<f64>();
    let mut spread = sd.min(iqr / 1.34);
    if !(spread > 0.0) {
        spread = sd;
    }
    Ok(0.9 * spread * n_eff.powf(-0.2))
}

/// Posterior mode: KDE argmax on a 512-point grid for continuous values,
/// heaviest atom (ties to the smaller value) for discrete values.
pub fn posterior_mode(samples: &[(f64, f64)], kind: ValueKind) -> Result<f64, AnalysisError> {
    let total = check_weights(samples)?;
    let atoms = atoms(samples);
    if atoms.len() == 1 {
        return Ok(atoms[0].0);
    }
    match kind {
        ValueKind::Discrete => {
            let mut best = atoms[0];
            for &a in &atoms[1..] {
                if a.1 > best.1 {
                    best = a;
                }
            }
            Ok(best.0)
        }
        ValueKind::Continuous => {
            let h = silverman_bandwidth(samples)?;
            let lo = atoms[0].0 - 3.0 * h;
            let hi = atoms[atoms.len() - 1].0 + 3.0 * h;
            let dx = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
            let mut best = (lo, f64::NEG_INFINITY);
            for g in 0..KDE_GRID_POINTS {
                let x = lo + g as f64 * dx;
                let dens: f64 = atoms
                    .iter()
                    .map(|&(v, w)| {
                        let z = (x - v) / h;
                        w * (-0.5 * z * z).exp()
                    })
                    .sum::<f64>()
                    / total;
                if dens > best.1 {
                    best = (x, dens);
                }
            }
            Ok(best.0)
        }
    }
}

/// Mode and HPD interval of one marginal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub model: usize,
    pub param: String,
    pub mode: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub n_particles: usize,
}

/// Weighted marginal summaries for every parameter of `model`.
pub fn summarize_model(
    pop: &Population,
    model: usize,
    level: f64,
) -> Result<Vec<ParamSummary>, AnalysisError> {
    let particles: Vec<_> = pop.of_model(model).collect();
    let Some(first) = particles.first() else {
        return Ok(Vec::new());
    };
    let ids: Vec<ParamId> = first.theta.layout.components();
    ids.into_iter()
        .map(|id| {
            let samples: Vec<(f64, f64)> = particles
                .iter()
                .map(|p| (p.theta.get(id).expect("shared layout"), p.weight))
                .collect();
            let kind = if id.is_discrete() {
                ValueKind::Discrete
            } else {
                ValueKind::Continuous
            };
            let (lower, upper) = hpd_interval(&samples, level)?;
            Ok(ParamSummary {
                model,
                param: id.name(),
                mode: posterior_mode(&samples, kind)?,
                lower,
                upper,
                level,
                n_particles: particles.len(),
            })
        })
        .collect()
}

/// Point estimate built from marginal modes of `model`'s particles.
pub fn modal_theta(pop: &Population, model: usize) -> Result<Option<ParamVector>, AnalysisError> {
    let Some(first) = pop.of_model(model).next() else {
        return Ok(None);
    };
    let mut theta = first.theta.clone();
    for s in summarize_model(pop, model, 0.95)? {
        let id = ParamId::parse(&s.param).expect("summary names parse");
        theta.set(id, s.mode);
    }
    Ok(Some(theta))
}

/// One row of the model comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRow {
    pub index: usize,
    pub data_model: String,
    pub process_model: String,
    pub probability: f64,
    /// Bayes factor of the reference model against this row (equal model
    /// priors); `+∞` when this row has zero probability.
    pub bf: f64,
    pub evidence: Evidence,
}

/// Models ordered by posterior probability with Bayes factors in favor of
/// the most probable model.
pub fn model_table(models: &[ModelSpec], posterior: &ModelPosterior) -> Vec<ModelRow> {
    let (_, p_best) = posterior.best();
    let prior = 1.0 / models.len() as f64;
    posterior
        .ranking()
        .into_iter()
        .map(|m| {
            let p = posterior.probs[m - 1];
            let bf =
                bayes_factor(p_best, p, prior, prior).expect("best model has positive probability");
            let spec = &models[m - 1];
            ModelRow {
                index: m,
                data_model: spec.data.label().to_string(),
                process_model: spec.process.label().to_string(),
                probability: p,
                bf: bf.value,
                evidence: bf.evidence,
            }
        })
        .collect()
}

/// Result of one forward simulation in a goodness-of-fit ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReplicate {
    pub replicate: usize,
    pub series: Result<Vec<ObservedSeries>, SimError>,
}

/// `n_rep` full forward simulations (process then data model) at `theta`.
/// A diverging replicate is recorded, not fatal.
pub fn fit_ensemble(
    model: &ModelSpec,
    theta: &ParamVector,
    contexts: &[EpidemicContext],
    n_rep: usize,
    rng: &mut SimRng,
) -> Vec<EnsembleReplicate> {
    (0..n_rep)
        .map(|replicate| EnsembleReplicate {
            replicate,
            series: model.simulate_dataset(theta, contexts, rng),
        })
        .collect()
}

/// Marginal samples of one parameter as `(value, weight)` pairs.
pub fn marginal(pop: &Population, model: usize, id: ParamId) -> Vec<(f64, f64)> {
    pop.of_model(model)
        .filter_map(|p| p.theta.get(id).map(|v| (v, p.weight)))
        .collect()
}

/// Counts per distinct best-model index, for tallies across datasets.
pub fn tally<I: IntoIterator<Item = usize>>(items: I) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for k in items {
        *out.entry(k).or_insert(0) += 1;
    }
    out
}
