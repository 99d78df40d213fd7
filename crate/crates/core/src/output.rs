//! CSV and JSON writers for populations, summary tables, ensembles and
//! study results, plus a population reader for re-analysis.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{EnsembleReplicate, ModelRow, ParamSummary};
use crate::data::EpidemicData;
use crate::distributions::{InitialConditions, ParamId, ParamLayout, ParamVector};
use crate::dynamics::{DynParams, Transmission};
use crate::harness::StudyResult;
use crate::models::ModelSpec;
use crate::smc::{Particle, Population};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> OutputError {
    OutputError::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Writes `rows` under `header`, creating parent directories.
fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), OutputError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OutputError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| OutputError::Json {
        path: path.display().to_string(),
        source,
    })?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Parameter columns for every model with `n_epidemics` epidemics.
pub fn population_param_columns(n_epidemics: usize) -> Vec<ParamId> {
    let mut ids = vec![
        ParamId::Beta,
        ParamId::Mu,
        ParamId::Gamma,
        ParamId::Epsilon,
        ParamId::Tau,
    ];
    for k in 0..n_epidemics {
        ids.extend([ParamId::S0(k), ParamId::I0(k), ParamId::E0(k)]);
    }
    ids
}

const POP_LEADING: [&str; 4] = ["generation", "tolerance", "model", "model_name"];
const POP_TRAILING: [&str; 3] = ["hits", "raw_weight", "weight"];

/// One row per particle; parameters a model lacks are left empty.
pub fn write_population(
    path: &Path,
    pop: &Population,
    models: &[ModelSpec],
    n_epidemics: usize,
) -> Result<(), OutputError> {
    let ids = population_param_columns(n_epidemics);
    let mut header = strings(&POP_LEADING);
    header.extend(ids.iter().map(|id| id.name()));
    header.extend(strings(&POP_TRAILING));
    let rows: Vec<Vec<String>> = pop
        .particles
        .iter()
        .map(|p| {
            let mut r = vec![
                pop.generation.to_string(),
                pop.tolerance.to_string(),
                p.model.to_string(),
                models[p.model - 1].name(),
            ];
            r.extend(
                ids.iter()
                    .map(|&id| p.theta.get(id).map(|v| v.to_string()).unwrap_or_default()),
            );
            r.push(p.hits.to_string());
            r.push(p.raw_weight().to_string());
            r.push(p.weight.to_string());
            r
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// Reads a file written by [`write_population`]. Model indices and names
/// must agree with `models`. `attempts` is not stored and reads as 0.
pub fn read_population(path: &Path, models: &[ModelSpec]) -> Result<Population, OutputError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format_err(path, format!("missing column `{name}`")))
    };
    let leading: Vec<usize> = POP_LEADING
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let trailing: Vec<usize> = POP_TRAILING
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let params: Vec<(ParamId, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| ParamId::parse(h).map(|id| (id, i)))
        .collect();
    let n_epidemics = params
        .iter()
        .filter_map(|(id, _)| match id {
            ParamId::S0(k) => Some(k + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);

    let mut generation = None;
    let mut tolerance = f64::NAN;
    let mut particles = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = line + 2;
        let bad = |what: &str| format_err(path, format!("line {row}: invalid {what}"));
        let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what));

        let g: usize = rec[leading[0]].parse().map_err(|_| bad("generation"))?;
        if *generation.get_or_insert(g) != g {
            return Err(bad("generation (mixed generations)"));
        }
        tolerance = num(leading[1], "tolerance")?;
        let model: usize = rec[leading[2]].parse().map_err(|_| bad("model"))?;
        let spec = model
            .checked_sub(1)
            .and_then(|k| models.get(k))
            .ok_or_else(|| bad("model index"))?;
        if spec.name() != rec[leading[3]] {
            return Err(bad("model_name"));
        }

        let layout = ParamLayout::new(spec.transmission(), n_epidemics);
        let mut theta = ParamVector {
            layout,
            dyn_params: DynParams::default(),
            ics: vec![
                InitialConditions {
                    s0: 0,
                    i0: 0,
                    e0: (layout.transmission == Transmission::Indirect).then_some(0.0),
                };
                n_epidemics
            ],
        };
        let wanted = layout.components();
        for &(id, i) in &params {
            let cell = &rec[i];
            match (wanted.contains(&id), cell.is_empty()) {
                (true, false) => theta.set(id, num(i, &id.name())?),
                (false, true) => {}
                _ => return Err(bad(&id.name())),
            }
        }
        let hits: u32 = rec[trailing[0]].parse().map_err(|_| bad("hits"))?;
        let raw = num(trailing[1], "raw_weight")?;
        let weight = num(trailing[2], "weight")?;
        particles.push(Particle {
            model,
            theta,
            hits,
            ln_raw_weight: raw.ln(),
            weight,
        });
    }
    Ok(Population {
        generation: generation.ok_or_else(|| format_err(path, "no particles"))?,
        tolerance,
        particles,
        attempts: 0,
        n_models: models.len(),
    })
}

/// Per-generation tolerance, attempts, acceptance rate and model counts.
pub fn write_generations(
    path: &Path,
    pops: &[Population],
    models: &[ModelSpec],
) -> Result<(), OutputError> {
    let mut header = strings(&["generation", "tolerance", "attempts", "acceptance_rate"]);
    header.extend(models.iter().map(|m| format!("n_{}", m.name())));
    let rows: Vec<Vec<String>> = pops
        .iter()
        .map(|p| {
            let mut r = vec![
                p.generation.to_string(),
                p.tolerance.to_string(),
                p.attempts.to_string(),
                p.acceptance_rate().to_string(),
            ];
            r.extend(p.model_counts().iter().map(|c| c.to_string()));
            r
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// Model comparison table, most probable model first.
pub fn write_model_table(path: &Path, rows: &[ModelRow]) -> Result<(), OutputError> {
    let header = strings(&[
        "rank",
        "model",
        "data_model",
        "process_model",
        "probability",
        "bf",
        "evidence",
    ]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            vec![
                (k + 1).to_string(),
                r.index.to_string(),
                r.data_model.clone(),
                r.process_model.clone(),
                r.probability.to_string(),
                r.bf.to_string(),
                r.evidence.label().to_string(),
            ]
        })
        .collect();
    write_rows(path, &header, &body)
}

/// Marginal modes and HPD intervals.
pub fn write_param_summary(
    path: &Path,
    rows: &[ParamSummary],
    models: &[ModelSpec],
) -> Result<(), OutputError> {
    let header = strings(&[
        "model",
        "model_name",
        "param",
        "mode",
        "hpd_lower",
        "hpd_upper",
        "level",
        "n_particles",
    ]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|s| {
            vec![
                s.model.to_string(),
                models[s.model - 1].name(),
                s.param.clone(),
                s.mode.to_string(),
                s.lower.to_string(),
                s.upper.to_string(),
                s.level.to_string(),
                s.n_particles.to_string(),
            ]
        })
        .collect();
    write_rows(path, &header, &body)
}

/// Long-format ensemble: one row per replicate, epidemic and observation
/// time. Diverged replicates get a single row with an empty count and the
/// error text.
pub fn write_ensemble(
    path: &Path,
    reps: &[EnsembleReplicate],
    epidemics: &[EpidemicData],
) -> Result<(), OutputError> {
    let header = strings(&["replicate", "epidemic", "time", "c_tilde", "error"]);
    let mut body = Vec::new();
    for rep in reps {
        match &rep.series {
            Ok(series) => {
                for (e, s) in epidemics.iter().zip(series) {
                    for (t, c) in s.times_f64().iter().zip(&s.c_tilde) {
                        body.push(vec![
                            rep.replicate.to_string(),
                            e.label.clone(),
                            t.to_string(),
                            c.to_string(),
                            String::new(),
                        ]);
                    }
                }
            }
            Err(err) => body.push(vec![
                rep.replicate.to_string(),
                String::new(),
                String::new(),
                String::new(),
                err.to_string(),
            ]),
        }
    }
    write_rows(path, &header, &body)
}

/// Writes `outcomes.csv`, `recovery.csv`, `rank_distribution.csv`,
/// `bf_histogram.csv` and `failures.csv` into `dir`.
pub fn write_study(dir: &Path, study: &StudyResult) -> Result<(), OutputError> {
    let mut header = strings(&[
        "dataset",
        "data_seed",
        "smc_seed",
        "regenerations",
        "best_model",
        "best_name",
        "true_rank",
        "bf_best_vs_true",
    ]);
    header.extend(study.model_names.iter().map(|n| format!("p_{n}")));
    let rows: Vec<Vec<String>> = study
        .outcomes
        .iter()
        .map(|o| {
            let mut r = vec![
                o.dataset.to_string(),
                o.data_seed.to_string(),
                o.smc_seed.to_string(),
                o.regenerations.to_string(),
                o.best_model.to_string(),
                o.best_name.clone(),
                o.true_rank.to_string(),
                o.bf_best_vs_true.to_string(),
            ];
            r.extend(o.probs.iter().map(|p| p.to_string()));
            r
        })
        .collect();
    write_rows(&dir.join("outcomes.csv"), &header, &rows)?;

    let best = study.best_counts();
    let recovery: Vec<Vec<String>> = study
        .model_names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            vec![
                (k + 1).to_string(),
                n.clone(),
                (k + 1 == study.true_model).to_string(),
                best[k].to_string(),
            ]
        })
        .collect();
    write_rows(
        &dir.join("recovery.csv"),
        &strings(&["model", "model_name", "is_true", "times_best"]),
        &recovery,
    )?;

    let ranks: Vec<Vec<String>> = study
        .rank_counts()
        .iter()
        .enumerate()
        .map(|(k, c)| vec![(k + 1).to_string(), c.to_string()])
        .collect();
    write_rows(
        &dir.join("rank_distribution.csv"),
        &strings(&["true_rank", "datasets"]),
        &ranks,
    )?;

    let bins: Vec<Vec<String>> = study
        .bf_histogram()
        .iter()
        .map(|(lo, hi, n)| vec![lo.to_string(), hi.to_string(), n.to_string()])
        .collect();
    write_rows(
        &dir.join("bf_histogram.csv"),
        &strings(&["bf_low", "bf_high", "datasets"]),
        &bins,
    )?;

    let failures: Vec<Vec<String>> = study
        .failures
        .iter()
        .map(|f| vec![f.dataset.to_string(), f.error.clone()])
        .collect();
    write_rows(
        &dir.join("failures.csv"),
        &strings(&["dataset", "error"]),
        &failures,
    )
}
