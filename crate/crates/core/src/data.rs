//! Observed epidemic data and its CSV form.
//!
//! The dataset file has header `epidemic,year,a,m,c_tilde`, one row per
//! observation year. The `(a, m)` on a row apply from that year until the
//! next row's year.

use std::path::Path;

use thiserror::Error;

use crate::dynamics::{EnvSchedule, Environment};
use crate::models::EpidemicContext;
use crate::observe::ObservedSeries;
use crate::simulate::{GridError, TimeGrid};

pub const DATASET_HEADER: [&str; 5] = ["epidemic", "year", "a", "m", "c_tilde"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("dataset validation failed:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("dataset has no rows")]
    Empty,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Observation years, known `(a, m)` per year and observed cumulative deaths
/// for one epidemic.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicData {
    pub label: String,
    pub years: Vec<f64>,
    pub env: Vec<Environment>,
    pub observed: ObservedSeries,
}

impl EpidemicData {
    pub fn t0(&self) -> f64 {
        self.years[0]
    }

    pub fn schedule(&self) -> EnvSchedule {
        EnvSchedule::piecewise(
            self.years
                .iter()
                .copied()
                .zip(self.env.iter().copied())
                .collect(),
        )
        .expect("years validated strictly increasing")
    }

    pub fn grid(&self, step: f64) -> Result<TimeGrid, GridError> {
        TimeGrid::new(self.t0(), self.years.clone(), step)
    }

    pub fn context(&self, step: f64) -> Result<EpidemicContext, GridError> {
        Ok(EpidemicContext {
            grid: self.grid(step)?,
            env: self.schedule(),
        })
    }
}

/// All epidemics sharing one set of disease parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub epidemics: Vec<EpidemicData>,
}

impl Dataset {
    /// Total observation count across epidemics.
    pub fn n_obs(&self) -> usize {
        self.epidemics.iter().map(|e| e.years.len()).sum()
    }

    pub fn observed(&self) -> Vec<ObservedSeries> {
        self.epidemics.iter().map(|e| e.observed.clone()).collect()
    }

    pub fn contexts(&self, step: f64) -> Result<Vec<EpidemicContext>, GridError> {
        self.epidemics.iter().map(|e| e.context(step)).collect()
    }

    /// Same years and `(a, m)` with new observed counts.
    pub fn with_observations(&self, observed: Vec<ObservedSeries>) -> Self {
        Self {
            epidemics: self
                .epidemics
                .iter()
                .zip(observed)
                .map(|(e, o)| EpidemicData {
                    observed: o,
                    ..e.clone()
                })
                .collect(),
        }
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    read_dataset(file)
}

pub fn read_dataset<R: std::io::Read>(reader: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<String> = DATASET_HEADER
        .iter()
        .filter(|h| col(h).is_none())
        .map(|h| h.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingColumns(missing));
    }
    let idx: Vec<usize> = DATASET_HEADER.iter().map(|h| col(h).unwrap()).collect();

    let mut problems = Vec::new();
    let mut epidemics: Vec<EpidemicData> = Vec::new();
    let mut counts: Vec<Vec<u64>> = Vec::new();

    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record?;
        let field = |j: usize| record.get(idx[j]).unwrap_or("");
        let label = field(0).to_string();
        let num = |j: usize| field(j).parse::<f64>().ok().filter(|v| v.is_finite());
        let (Some(year), Some(a), Some(m)) = (num(1), num(2), num(3)) else {
            problems.push(format!("line {line}: year, a and m must be finite numbers"));
            continue;
        };
        if a < 0.0 || m < 0.0 {
            problems.push(format!("line {line}: a and m must be nonnegative"));
        }
        let c = match field(4).parse::<i64>() {
            Ok(c) if c >= 0 => c as u64,
            Ok(c) => {
                problems.push(format!("line {line}: negative count c_tilde = {c}"));
                continue;
            }
            Err(_) => {
                problems.push(format!(
                    "line {line}: c_tilde `{}` is not an integer",
                    field(4)
                ));
                continue;
            }
        };

        let pos = match epidemics.iter().position(|e| e.label == label) {
            Some(p) => p,
            None => {
                if c != 0 {
                    problems.push(format!(
                        "line {line}: first c_tilde of epidemic `{label}` must be 0, got {c}"
                    ));
                }
                epidemics.push(EpidemicData {
                    label: label.clone(),
                    years: Vec::new(),
                    env: Vec::new(),
                    observed: ObservedSeries::new(&[], Vec::new()),
                });
                counts.push(Vec::new());
                epidemics.len() - 1
            }
        };
        let epi = &mut epidemics[pos];
        if let Some(&prev) = epi.years.last() {
            if year <= prev {
                problems.push(format!(
                    "line {line}: year {year} not after {prev} in epidemic `{label}`"
                ));
                continue;
            }
        }
        epi.years.push(year);
        epi.env.push(Environment::new(a, m));
        counts[pos].push(c);
    }

    if !problems.is_empty() {
        return Err(DataError::Invalid(problems));
    }
    if epidemics.is_empty() {
        return Err(DataError::Empty);
    }
    for (epi, c) in epidemics.iter_mut().zip(counts) {
        epi.observed = ObservedSeries::new(&epi.years, c);
    }
    Ok(Dataset { epidemics })
}

/// Writes `dataset` to `path`, creating parent directories.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    write_dataset_to(dataset, file)
}

pub fn write_dataset_to<W: std::io::Write>(dataset: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DATASET_HEADER)?;
    for epi in &dataset.epidemics {
        for ((year, env), c) in epi.years.iter().zip(&epi.env).zip(&epi.observed.c_tilde) {
            w.write_record([
                epi.label.clone(),
                year.to_string(),
                env.a.to_string(),
                env.m.to_string(),
                c.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
