//! Run settings from defaults, environment, config file and flags, in
//! increasing order of precedence.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use epiabc::{ModelRegistry, PriorSpec, ProposalSpec, RunConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ENV_PREFIX: &str = "EPIABC_";
pub const DEFAULT_OUT: &str = "epiabc-out";
pub const DEFAULT_PRIORS: &str = "informative1";
pub const DEFAULT_HPD_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PriorChoice {
    Preset(String),
    Custom(PriorSpec),
}

/// Every field optional; absent fields fall through to lower layers.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub menu: Option<Vec<String>>,
    pub priors: Option<PriorChoice>,
    pub proposals: Option<ProposalSpec>,
    pub tolerances: Option<Vec<f64>>,
    pub n_particles: Option<usize>,
    pub replicates: Option<u32>,
    pub step: Option<f64>,
    pub seed: Option<u64>,
    pub max_attempts: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub hpd_level: Option<f64>,
}

fn parse_env<T: FromStr>(key: &str, raw: Option<String>) -> Result<Option<T>, CliError> {
    raw.map(|v| {
        v.trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{ENV_PREFIX}{key}: cannot parse `{v}`")))
    })
    .transpose()
}

fn parse_env_list<T: FromStr>(key: &str, raw: Option<String>) -> Result<Option<Vec<T>>, CliError> {
    raw.map(|v| {
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{ENV_PREFIX}{key}: cannot parse `{s}`")))
            })
            .collect()
    })
    .transpose()
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Reads `EPIABC_*` variables through `lookup`. Lists are
    /// comma-separated; priors can only name a preset.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let get = |k: &str| lookup(&format!("{ENV_PREFIX}{k}"));
        Ok(Self {
            menu: parse_env_list("MENU", get("MENU"))?,
            priors: get("PRIORS").map(|s| PriorChoice::Preset(s.trim().to_string())),
            proposals: None,
            tolerances: parse_env_list("TOLERANCES", get("TOLERANCES"))?,
            n_particles: parse_env("N_PARTICLES", get("N_PARTICLES"))?,
            replicates: parse_env("REPLICATES", get("REPLICATES"))?,
            step: parse_env("STEP", get("STEP"))?,
            seed: parse_env("SEED", get("SEED"))?,
            max_attempts: parse_env("MAX_ATTEMPTS", get("MAX_ATTEMPTS"))?,
            threads: parse_env("THREADS", get("THREADS"))?,
            out: get("OUT").map(PathBuf::from),
            hpd_level: parse_env("HPD_LEVEL", get("HPD_LEVEL"))?,
        })
    }

    /// Fields of `self` win over those of `lower`.
    pub fn over(self, lower: Self) -> Self {
        Self {
            menu: self.menu.or(lower.menu),
            priors: self.priors.or(lower.priors),
            proposals: self.proposals.or(lower.proposals),
            tolerances: self.tolerances.or(lower.tolerances),
            n_particles: self.n_particles.or(lower.n_particles),
            replicates: self.replicates.or(lower.replicates),
            step: self.step.or(lower.step),
            seed: self.seed.or(lower.seed),
            max_attempts: self.max_attempts.or(lower.max_attempts),
            threads: self.threads.or(lower.threads),
            out: self.out.or(lower.out),
            hpd_level: self.hpd_level.or(lower.hpd_level),
        }
    }
}

/// Fully resolved settings. Serialized into run manifests; `threads` is
/// left out because it never changes results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub menu: Vec<String>,
    pub priors_name: Option<String>,
    pub priors: PriorSpec,
    pub proposals: ProposalSpec,
    pub tolerances: Vec<f64>,
    pub n_particles: usize,
    pub replicates: u32,
    pub step: f64,
    pub seed: Option<u64>,
    pub max_attempts: u64,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub out: PathBuf,
    pub hpd_level: f64,
}

impl Settings {
    pub fn resolve(layers: ConfigFile, registry: &ModelRegistry) -> Result<Self, CliError> {
        let defaults = RunConfig::default();
        let menu = layers.menu.unwrap_or_else(|| registry.full_menu_names());
        registry
            .menu(&menu)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let (priors_name, priors) = match layers
            .priors
            .unwrap_or(PriorChoice::Preset(DEFAULT_PRIORS.into()))
        {
            PriorChoice::Preset(name) => {
                let spec = PriorSpec::preset(&name).ok_or_else(|| {
                    CliError::Config(format!(
                        "unknown prior preset `{name}` (expected informative1, informative2 or noninformative)"
                    ))
                })?;
                (Some(name), spec)
            }
            PriorChoice::Custom(spec) => (None, spec),
        };
        priors.validate().map_err(CliError::Config)?;
        let proposals = layers.proposals.unwrap_or_default();
        proposals.validate().map_err(CliError::Config)?;
        let hpd_level = layers.hpd_level.unwrap_or(DEFAULT_HPD_LEVEL);
        if !(hpd_level > 0.0 && hpd_level < 1.0) {
            return Err(CliError::Config("hpd_level must lie in (0, 1)".into()));
        }
        let s = Self {
            menu,
            priors_name,
            priors,
            proposals,
            tolerances: layers.tolerances.unwrap_or(defaults.tolerances),
            n_particles: layers.n_particles.unwrap_or(defaults.n_particles),
            replicates: layers.replicates.unwrap_or(defaults.replicates),
            step: layers.step.unwrap_or(defaults.step),
            seed: layers.seed,
            max_attempts: layers.max_attempts.unwrap_or(defaults.max_attempts),
            threads: layers.threads.unwrap_or(defaults.threads),
            out: layers.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            hpd_level,
        };
        s.run_config(0).validate().map_err(CliError::Config)?;
        Ok(s)
    }

    pub fn run_config(&self, seed: u64) -> RunConfig {
        RunConfig {
            tolerances: self.tolerances.clone(),
            n_particles: self.n_particles,
            replicates: self.replicates,
            step: self.step,
            seed,
            max_attempts: self.max_attempts,
            threads: self.threads,
        }
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config(format!(
                "a seed is required (--seed, `seed` in the config file, or {ENV_PREFIX}SEED)"
            ))
        })
    }
}
