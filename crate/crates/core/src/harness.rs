//! Simulation study: synthetic datasets from a known model, a full model
//! menu fitted to each, and tallies of how often the generating model wins.

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{bayes_factor, model_probs, AnalysisError};
use crate::data::{Dataset, EpidemicData};
use crate::distributions::{InitialConditions, ParamLayout, ParamVector, PriorSpec, ProposalSpec};
use crate::dynamics::{DynParams, Environment, Transmission};
use crate::models::{ModelRegistry, ModelSpec, RegistryError};
use crate::observe::ObservedSeries;
use crate::rng::{derive_seed, stream};
use crate::simulate::GridError;
use crate::smc::{run_abc_smc, RunConfig, SmcError, SmcProblem};

const DATASET_TAG: u64 = 0xda7a;
const SMC_TAG: u64 = 0x5c;

/// Regeneration attempts allowed when a synthetic simulation diverges.
pub const MAX_REGENERATIONS: usize = 100;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("simulation diverged on {0} consecutive substreams")]
    Divergent(usize),
    #[error("scenario is inconsistent: {0}")]
    Invalid(String),
    #[error("generating model `{0}` is not in the model menu")]
    TrueModelMissing(String),
    #[error("n_datasets must be at least 1")]
    NoDatasets,
}

/// Observation years and known `(a, m)` for one synthetic epidemic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpidemicDesign {
    pub label: String,
    pub years: Vec<f64>,
    pub env: Vec<Environment>,
}

impl EpidemicDesign {
    /// `n` annual observations starting at `t0` under constant `(a, m)`.
    pub fn annual(label: &str, t0: f64, n: usize, env: Environment) -> Self {
        Self {
            label: label.to_string(),
            years: (0..n).map(|k| t0 + k as f64).collect(),
            env: vec![env; n],
        }
    }
}

/// Generating model, true parameters and observation design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub model: String,
    pub params: DynParams,
    pub ics: Vec<InitialConditions>,
    pub epidemics: Vec<EpidemicDesign>,
}

/// Implementer-chosen additions and natural mortality for the built-in
/// scenarios.
pub const DEFAULT_SCENARIO_ENV: Environment = Environment::new(3.0, 0.05);

fn default_designs() -> Vec<EpidemicDesign> {
    vec![
        EpidemicDesign::annual("1", 1974.0, 11, DEFAULT_SCENARIO_ENV),
        EpidemicDesign::annual("2", 1992.0, 10, DEFAULT_SCENARIO_ENV),
    ]
}

impl Scenario {
    /// Indirect SDE with Binomial observations.
    pub fn a() -> Self {
        Self {
            name: "a".into(),
            model: "indirect-sde-binom".into(),
            params: DynParams {
                gamma: 0.15,
                mu: 0.20,
                epsilon: 0.50,
                tau: 1.70,
                ..Default::default()
            },
            ics: vec![
                InitialConditions {
                    s0: 24,
                    i0: 5,
                    e0: Some(4.04),
                },
                InitialConditions {
                    s0: 22,
                    i0: 2,
                    e0: Some(0.87),
                },
            ],
            epidemics: default_designs(),
        }
    }

    /// Direct CTMC with Binomial observations.
    pub fn b() -> Self {
        Self {
            name: "b".into(),
            model: "direct-ctmc-binom".into(),
            params: DynParams {
                beta: 0.04,
                mu: 0.30,
                ..Default::default()
            },
            ics: vec![
                InitialConditions {
                    s0: 12,
                    i0: 14,
                    e0: None,
                },
                InitialConditions {
                    s0: 30,
                    i0: 5,
                    e0: None,
                },
            ],
            epidemics: default_designs(),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "a" => Some(Self::a()),
            "b" => Some(Self::b()),
            _ => None,
        }
    }

    /// True parameters laid out for the generating model.
    pub fn theta(&self, transmission: Transmission) -> Result<ParamVector, HarnessError> {
        if self.ics.len() != self.epidemics.len() {
            return Err(HarnessError::Invalid(format!(
                "{} initial-condition sets for {} epidemics",
                self.ics.len(),
                self.epidemics.len()
            )));
        }
        let indirect = transmission == Transmission::Indirect;
        if self.ics.iter().any(|ic| ic.e0.is_some() != indirect) {
            return Err(HarnessError::Invalid(
                "E0 must be given exactly for indirect models".into(),
            ));
        }
        Ok(ParamVector {
            layout: ParamLayout::new(transmission, self.epidemics.len()),
            dyn_params: self.params,
            ics: self.ics.clone(),
        })
    }

    /// Dataset skeleton with all-zero observations.
    pub fn skeleton(&self) -> Dataset {
        Dataset {
            epidemics: self
                .epidemics
                .iter()
                .map(|d| EpidemicData {
                    label: d.label.clone(),
                    years: d.years.clone(),
                    env: d.env.clone(),
                    observed: ObservedSeries::new(&d.years, vec![0; d.years.len()]),
                })
                .collect(),
        }
    }
}

/// Simulates the scenario's generating model at its observation years.
/// Returns the dataset and the number of diverged substreams skipped.
pub fn generate_dataset(
    sc: &Scenario,
    registry: &ModelRegistry,
    step: f64,
    seed: u64,
) -> Result<(Dataset, usize), HarnessError> {
    let model = registry.model(&sc.model)?;
    let theta = sc.theta(model.transmission())?;
    let skeleton = sc.skeleton();
    let contexts = skeleton.contexts(step)?;
    for sub in 0..MAX_REGENERATIONS {
        let mut rng = stream(seed, &[sub as u64]);
        if let Ok(obs) = model.simulate_dataset(&theta, &contexts, &mut rng) {
            return Ok((skeleton.with_observations(obs), sub));
        }
    }
    Err(HarnessError::Divergent(MAX_REGENERATIONS))
}

/// Outcome of the model-selection run on one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetOutcome {
    pub dataset: usize,
    pub data_seed: u64,
    pub smc_seed: u64,
    pub regenerations: usize,
    pub probs: Vec<f64>,
    pub best_model: usize,
    pub best_name: String,
    pub true_rank: usize,
    /// Bayes factor of the best model against the true model; 1 when the
    /// true model is best.
    pub bf_best_vs_true: f64,
    pub attempts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetFailure {
    pub dataset: usize,
    pub error: String,
}

/// Bayes-factor histogram edges for best-vs-true factors.
pub const BF_BIN_EDGES: [f64; 10] = [1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.6, 3.0, f64::INFINITY];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub scenario: String,
    pub true_model: usize,
    pub true_name: String,
    pub model_names: Vec<String>,
    pub outcomes: Vec<DatasetOutcome>,
    pub failures: Vec<DatasetFailure>,
}

impl StudyResult {
    /// Datasets where the true model has rank `r`, for `r = 1..=M`.
    pub fn rank_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.model_names.len()];
        for o in &self.outcomes {
            counts[o.true_rank - 1] += 1;
        }
        counts
    }

    pub fn true_best(&self) -> usize {
        self.outcomes.iter().filter(|o| o.true_rank == 1).count()
    }

    pub fn true_top2(&self) -> usize {
        self.outcomes.iter().filter(|o| o.true_rank <= 2).count()
    }

    /// Datasets with best-vs-true Bayes factor at most `limit`.
    pub fn bf_at_most(&self, limit: f64) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.bf_best_vs_true <= limit)
            .count()
    }

    /// Counts per `[BF_BIN_EDGES[k], BF_BIN_EDGES[k+1])`; the first bin holds
    /// exact ties (`BF = 1`) too.
    pub fn bf_histogram(&self) -> Vec<(f64, f64, usize)> {
        BF_BIN_EDGES
            .windows(2)
            .map(|w| {
                let n = self
                    .outcomes
                    .iter()
                    .filter(|o| o.bf_best_vs_true >= w[0] && o.bf_best_vs_true < w[1])
                    .count();
                (w[0], w[1], n)
            })
            .collect()
    }

    /// Datasets on which each model ranked first.
    pub fn best_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.model_names.len()];
        for o in &self.outcomes {
            counts[o.best_model - 1] += 1;
        }
        counts
    }
}

/// Settings shared by every dataset of a study.
pub struct StudySetup<'a> {
    pub registry: &'a ModelRegistry,
    pub menu: Vec<ModelSpec>,
    pub priors: PriorSpec,
    pub proposals: ProposalSpec,
    pub cfg: RunConfig,
}

/// Runs the SMC on one synthetic dataset.
pub fn run_dataset(
    sc: &Scenario,
    setup: &StudySetup<'_>,
    true_model: usize,
    dataset: usize,
) -> Result<(DatasetOutcome, Dataset), String> {
    let data_seed = derive_seed(setup.cfg.seed, &[DATASET_TAG, dataset as u64]);
    let smc_seed = derive_seed(setup.cfg.seed, &[SMC_TAG, dataset as u64]);
    let (data, regenerations) = generate_dataset(sc, setup.registry, setup.cfg.step, data_seed)
        .map_err(|e| e.to_string())?;
    let problem = SmcProblem::new(
        setup.menu.clone(),
        setup.priors,
        setup.proposals,
        &data,
        setup.cfg.step,
    )
    .map_err(|e: SmcError| e.to_string())?;
    let cfg = RunConfig {
        seed: smc_seed,
        ..setup.cfg.clone()
    };
    let pops = run_abc_smc(&cfg, &problem).map_err(|e| e.to_string())?;
    let last = pops.last().expect("schedule is non-empty");
    let post = model_probs(last).map_err(|e: AnalysisError| e.to_string())?;
    let (best, p_best) = post.best();
    let prior = 1.0 / setup.menu.len() as f64;
    let bf = bayes_factor(p_best, post.probs[true_model - 1], prior, prior)
        .map_err(|e| e.to_string())?
        .value;
    Ok((
        DatasetOutcome {
            dataset,
            data_seed,
            smc_seed,
            regenerations,
            probs: post.probs.clone(),
            best_model: best,
            best_name: setup.menu[best - 1].name(),
            true_rank: post.rank_of(true_model),
            bf_best_vs_true: bf,
            attempts: pops.iter().map(|p| p.attempts).collect(),
        },
        data,
    ))
}

/// Runs `n_datasets` datasets in sequence. A failed dataset is recorded in
/// `failures` and the study continues. `on_dataset` sees every result.
pub fn run_study<F>(
    sc: &Scenario,
    n_datasets: usize,
    setup: &StudySetup<'_>,
    mut on_dataset: F,
) -> Result<StudyResult, HarnessError>
where
    F: FnMut(usize, &Result<(DatasetOutcome, Dataset), String>),
{
    if n_datasets == 0 {
        return Err(HarnessError::NoDatasets);
    }
    let names: Vec<String> = setup.menu.iter().map(|m| m.name()).collect();
    let true_model = names
        .iter()
        .position(|n| *n == sc.model)
        .map(|k| k + 1)
        .ok_or_else(|| HarnessError::TrueModelMissing(sc.model.clone()))?;

    let mut result = StudyResult {
        scenario: sc.name.clone(),
        true_model,
        true_name: sc.model.clone(),
        model_names: names,
        outcomes: Vec::new(),
        failures: Vec::new(),
    };
    for d in 0..n_datasets {
        let r = run_dataset(sc, setup, true_model, d);
        on_dataset(d, &r);
        match r {
            Ok((o, _)) => result.outcomes.push(o),
            Err(error) => result.failures.push(DatasetFailure { dataset: d, error }),
        }
    }
    Ok(result)
}
