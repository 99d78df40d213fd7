use std::path::{Path, PathBuf};
use std::time::Instant;

use epiabc::analysis::{fit_ensemble, modal_theta, model_probs, model_table, summarize_model};
use epiabc::data::{load_dataset, write_dataset};
use epiabc::distributions::InitialConditions;
use epiabc::harness::{run_study, Scenario, StudySetup};
use epiabc::output::{
    read_population, write_ensemble, write_generations, write_json, write_model_table,
    write_param_summary, write_population, write_study,
};
use epiabc::rng::stream;
use epiabc::smc::run_abc_smc_with;
use epiabc::{Dataset, DynParams, ModelRegistry, ModelSpec, ParamVector, Population, SmcProblem};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigFile, Settings};
use crate::{CliError, Common};

const SIMULATE_TAG: u64 = 0xe5e;

fn resolve(common: &Common, registry: &ModelRegistry) -> Result<Settings, CliError> {
    let flags = ConfigFile {
        seed: common.seed,
        threads: common.threads,
        out: common.out.clone(),
        ..Default::default()
    };
    let file = match &common.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let env = ConfigFile::from_env(|k| std::env::var(k).ok())?;
    Settings::resolve(flags.over(file.over(env)), registry)
}

fn population_path(dir: &Path, generation: usize) -> PathBuf {
    dir.join("populations")
        .join(format!("generation_{generation:02}.csv"))
}

#[derive(Debug, Serialize, Deserialize)]
struct GenerationRecord {
    generation: usize,
    tolerance: f64,
    attempts: u64,
    acceptance_rate: f64,
    model_counts: Vec<usize>,
}

impl From<&Population> for GenerationRecord {
    fn from(p: &Population) -> Self {
        Self {
            generation: p.generation,
            tolerance: p.tolerance,
            attempts: p.attempts,
            acceptance_rate: p.acceptance_rate(),
            model_counts: p.model_counts(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Timing {
    wall_seconds: f64,
    threads: usize,
}

fn write_timing(dir: &Path, start: Instant, threads: usize) -> Result<(), CliError> {
    let t = Timing {
        wall_seconds: start.elapsed().as_secs_f64(),
        threads,
    };
    Ok(write_json(&dir.join("timing.json"), &t)?)
}

/// Model table and per-model parameter summaries for the final population.
fn write_tables(
    dir: &Path,
    models: &[ModelSpec],
    last: &Population,
    level: f64,
) -> Result<(), CliError> {
    let post = model_probs(last).map_err(|e| CliError::Smc(e.to_string()))?;
    write_model_table(&dir.join("model_table.csv"), &model_table(models, &post))?;
    let mut rows = Vec::new();
    for m in 1..=models.len() {
        rows.extend(summarize_model(last, m, level).map_err(|e| CliError::Smc(e.to_string()))?);
    }
    write_param_summary(&dir.join("param_summary.csv"), &rows, models)?;
    Ok(())
}

#[derive(Serialize)]
struct InferManifest<'a> {
    command: &'static str,
    version: &'static str,
    settings: &'a Settings,
    data_file: &'static str,
    epidemics: Vec<String>,
    n_obs: usize,
    generations: Vec<GenerationRecord>,
    completed: bool,
    error: Option<String>,
}

pub fn infer(common: &Common, data: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let registry = ModelRegistry::builtin();
    let settings = resolve(common, &registry)?;
    let seed = settings.require_seed()?;
    let dataset =
        load_dataset(data).map_err(|e| CliError::Data(format!("{}: {e}", data.display())))?;
    let models = registry
        .menu(&settings.menu)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = settings.run_config(seed);
    let problem = SmcProblem::new(
        models.clone(),
        settings.priors,
        settings.proposals,
        &dataset,
        cfg.step,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;

    let out = &settings.out;
    write_dataset(&dataset, &out.join("data.csv")).map_err(|e| CliError::Io(e.to_string()))?;
    let n_epi = dataset.epidemics.len();
    let mut records = Vec::new();
    let mut write_failure = None;
    let result = run_abc_smc_with(&cfg, &problem, |pop| {
        eprintln!(
            "generation {} (xi = {}): {} attempts, acceptance {:.3e}",
            pop.generation,
            pop.tolerance,
            pop.attempts,
            pop.acceptance_rate()
        );
        records.push(GenerationRecord::from(pop));
        if write_failure.is_none() {
            write_failure =
                write_population(&population_path(out, pop.generation), pop, &models, n_epi).err();
        }
    });
    if let Some(e) = write_failure {
        return Err(e.into());
    }
    let manifest = |error: Option<String>, generations| InferManifest {
        command: "infer",
        version: env!("CARGO_PKG_VERSION"),
        settings: &settings,
        data_file: "data.csv",
        epidemics: dataset.epidemics.iter().map(|e| e.label.clone()).collect(),
        n_obs: dataset.n_obs(),
        generations,
        completed: error.is_none(),
        error,
    };
    let pops = match result {
        Ok(p) => p,
        Err(e) => {
            write_json(
                &out.join("manifest.json"),
                &manifest(Some(e.to_string()), records),
            )?;
            write_timing(out, start, settings.threads)?;
            return Err(CliError::Smc(e.to_string()));
        }
    };
    write_generations(&out.join("generations.csv"), &pops, &models)?;
    write_tables(
        out,
        &models,
        pops.last().expect("non-empty schedule"),
        settings.hpd_level,
    )?;
    write_json(&out.join("manifest.json"), &manifest(None, records))?;
    write_timing(out, start, settings.threads)
}

#[derive(Deserialize)]
struct SavedSettings {
    menu: Vec<String>,
    hpd_level: f64,
}

#[derive(Deserialize)]
struct SavedRun {
    settings: SavedSettings,
    generations: Vec<GenerationRecord>,
    completed: bool,
}

/// Menu and final population of an earlier `infer` run.
fn load_run(
    dir: &Path,
    registry: &ModelRegistry,
) -> Result<(SavedRun, Vec<ModelSpec>, Population), CliError> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let run: SavedRun = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let models = registry
        .menu(&run.settings.menu)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let last = run
        .generations
        .last()
        .ok_or_else(|| CliError::Data(format!("{}: no completed generations", path.display())))?;
    let mut pop = read_population(&population_path(dir, last.generation), &models)
        .map_err(|e| CliError::Data(e.to_string()))?;
    pop.attempts = last.attempts;
    Ok((run, models, pop))
}

pub fn summarize(dir: &Path) -> Result<(), CliError> {
    let registry = ModelRegistry::builtin();
    let (run, models, pop) = load_run(dir, &registry)?;
    if !run.completed {
        eprintln!(
            "warning: run did not complete; summarizing generation {}",
            pop.generation
        );
    }
    write_tables(dir, &models, &pop, run.settings.hpd_level)
}

#[derive(Serialize)]
struct StudyManifest<'a> {
    command: &'static str,
    version: &'static str,
    settings: &'a Settings,
    scenario: &'a Scenario,
    n_datasets: usize,
    succeeded: usize,
    failed: usize,
    true_best: usize,
    true_top2: usize,
    bf_at_most_3: usize,
}

#[derive(Serialize)]
struct DatasetManifest<'a, T: Serialize> {
    dataset: usize,
    #[serde(flatten)]
    result: &'a T,
}

pub fn study(common: &Common, scenario: &str, n: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let registry = ModelRegistry::builtin();
    let settings = resolve(common, &registry)?;
    let seed = settings.require_seed()?;
    let sc = Scenario::builtin(scenario).ok_or_else(|| {
        CliError::Config(format!("unknown scenario `{scenario}` (expected a or b)"))
    })?;
    if n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    let setup = StudySetup {
        registry: &registry,
        menu: registry
            .menu(&settings.menu)
            .map_err(|e| CliError::Config(e.to_string()))?,
        priors: settings.priors,
        proposals: settings.proposals,
        cfg: settings.run_config(seed),
    };
    let out = &settings.out;
    let mut write_failure: Option<CliError> = None;
    let result = run_study(&sc, n, &setup, |d, r| {
        let dir = out.join("datasets").join(format!("dataset_{:02}", d + 1));
        let written = match r {
            Ok((o, data)) => {
                eprintln!(
                    "dataset {}: best {} (true model rank {}, BF {:.3})",
                    d + 1,
                    o.best_name,
                    o.true_rank,
                    o.bf_best_vs_true
                );
                write_dataset(data, &dir.join("data.csv"))
                    .map_err(|e| CliError::Io(e.to_string()))
                    .and_then(|_| {
                        Ok(write_json(
                            &dir.join("manifest.json"),
                            &DatasetManifest {
                                dataset: d,
                                result: o,
                            },
                        )?)
                    })
            }
            Err(e) => {
                eprintln!("warning: dataset {} failed and is excluded: {e}", d + 1);
                #[derive(Serialize)]
                struct Failure<'a> {
                    error: &'a str,
                }
                write_json(
                    &dir.join("manifest.json"),
                    &DatasetManifest {
                        dataset: d,
                        result: &Failure { error: e },
                    },
                )
                .map_err(CliError::from)
            }
        };
        if write_failure.is_none() {
            write_failure = written.err();
        }
    })
    .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(e) = write_failure {
        return Err(e);
    }
    write_study(out, &result)?;
    let manifest = StudyManifest {
        command: "study",
        version: env!("CARGO_PKG_VERSION"),
        settings: &settings,
        scenario: &sc,
        n_datasets: n,
        succeeded: result.outcomes.len(),
        failed: result.failures.len(),
        true_best: result.true_best(),
        true_top2: result.true_top2(),
        bf_at_most_3: result.bf_at_most(3.0),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    write_timing(out, start, settings.threads)?;
    if result.outcomes.is_empty() {
        return Err(CliError::Smc("every dataset failed".into()));
    }
    Ok(())
}

pub struct SimulateArgs {
    pub model: Option<String>,
    pub reps: usize,
    pub scenario: String,
    pub theta: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub from_run: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaFile {
    params: DynParams,
    ics: Vec<InitialConditions>,
}

#[derive(Serialize)]
struct ThetaEntry {
    param: String,
    value: f64,
}

#[derive(Serialize)]
struct SimulateManifest {
    command: &'static str,
    version: &'static str,
    model: String,
    theta: Vec<ThetaEntry>,
    reps: usize,
    seed: u64,
    step: f64,
    design: String,
    diverged: usize,
}

pub fn simulate(common: &Common, args: &SimulateArgs) -> Result<(), CliError> {
    let registry = ModelRegistry::builtin();
    let settings = resolve(common, &registry)?;
    let seed = settings.seed.unwrap_or(0);
    let pick = |name: &str| {
        registry
            .model(name)
            .map_err(|e| CliError::Config(e.to_string()))
    };

    let (model, theta, design, source): (ModelSpec, ParamVector, Dataset, String) =
        match &args.from_run {
            Some(dir) => {
                let (_, models, pop) = load_run(dir, &registry)?;
                let index = match &args.model {
                    Some(name) => models
                        .iter()
                        .position(|m| m.name() == *name)
                        .map(|k| k + 1)
                        .ok_or_else(|| {
                            CliError::Config(format!("model `{name}` is not in the run's menu"))
                        })?,
                    None => {
                        model_probs(&pop)
                            .map_err(|e| CliError::Data(e.to_string()))?
                            .best()
                            .0
                    }
                };
                let theta = modal_theta(&pop, index)
                    .map_err(|e| CliError::Data(e.to_string()))?
                    .ok_or_else(|| {
                        CliError::Data(format!(
                            "model {index} has no particles in the final population"
                        ))
                    })?;
                let path = dir.join("data.csv");
                let data = load_dataset(&path)
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                (
                    models[index - 1].clone(),
                    theta,
                    data,
                    path.display().to_string(),
                )
            }
            None => {
                let mut sc = Scenario::builtin(&args.scenario).ok_or_else(|| {
                    CliError::Config(format!(
                        "unknown scenario `{}` (expected a or b)",
                        args.scenario
                    ))
                })?;
                if let Some(path) = &args.theta {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                    let t: ThetaFile = toml::from_str(&text)
                        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                    sc.params = t.params;
                    sc.ics = t.ics;
                }
                let model = pick(args.model.as_deref().unwrap_or(&sc.model))?;
                let (design, source) = match &args.data {
                    Some(path) => (
                        load_dataset(path)
                            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
                        path.display().to_string(),
                    ),
                    None => (sc.skeleton(), format!("scenario {}", sc.name)),
                };
                if sc.ics.len() != design.epidemics.len() {
                    return Err(CliError::Config(format!(
                        "{} initial-condition sets for {} epidemics",
                        sc.ics.len(),
                        design.epidemics.len()
                    )));
                }
                let theta = sc
                    .theta(model.transmission())
                    .map_err(|e| CliError::Config(e.to_string()))?;
                (model, theta, design, source)
            }
        };

    let contexts = design
        .contexts(settings.step)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let mut rng = stream(seed, &[SIMULATE_TAG]);
    let reps = fit_ensemble(&model, &theta, &contexts, args.reps, &mut rng);
    let diverged = reps.iter().filter(|r| r.series.is_err()).count();
    if diverged > 0 {
        eprintln!("warning: {diverged} of {} replicates diverged", args.reps);
    }
    let out = &settings.out;
    write_ensemble(&out.join("ensemble.csv"), &reps, &design.epidemics)?;
    let manifest = SimulateManifest {
        command: "simulate",
        version: env!("CARGO_PKG_VERSION"),
        model: model.name(),
        theta: theta
            .components()
            .into_iter()
            .map(|(id, value)| ThetaEntry {
                param: id.name(),
                value,
            })
            .collect(),
        reps: args.reps,
        seed,
        step: settings.step,
        design: source,
        diverged,
    };
    Ok(write_json(&out.join("manifest.json"), &manifest)?)
}
