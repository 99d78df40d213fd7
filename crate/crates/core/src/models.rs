//! Process and data models behind common traits, and the registry that maps
//! model names such as `direct-ctmc-binom` to runnable [`ModelSpec`]s.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::distributions::{ParamLayout, ParamVector};
use crate::dynamics::{DynParams, EnvSchedule, StateVector, Transmission};
use crate::observe::{observe_binomial, observe_poisson, ObservedSeries};
use crate::rng::SimRng;
use crate::simulate::{simulate_ctmc, simulate_ode, simulate_sde, SimError, TimeGrid, Trajectory};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("unknown model `{0}` (expected <process>-<data>, e.g. direct-ctmc-binom)")]
    UnknownModel(String),
    #[error("unknown process model `{0}`")]
    UnknownProcess(String),
    #[error("unknown data model `{0}`")]
    UnknownData(String),
    #[error("empty model menu")]
    EmptyMenu,
}

/// A latent dynamical process that can be simulated forward.
pub trait ProcessModel: Send + Sync {
    /// Registry key, e.g. `indirect-sde`.
    fn name(&self) -> &str;
    /// Table label, e.g. `Indirect SDE`.
    fn label(&self) -> &str;
    fn transmission(&self) -> Transmission;
    /// Deterministic processes are simulated once per parameter proposal.
    fn is_deterministic(&self) -> bool;
    fn simulate(
        &self,
        p: &DynParams,
        x0: &StateVector,
        grid: &TimeGrid,
        env: &EnvSchedule,
        rng: &mut SimRng,
    ) -> Result<Trajectory, SimError>;
}

/// Observation model applied to a latent trajectory.
pub trait DataModel: Send + Sync {
    fn name(&self) -> &str;
    fn label(&self) -> &str;
    fn observe(&self, traj: &Trajectory, rng: &mut SimRng) -> ObservedSeries;
}

pub struct OdeProcess(pub Transmission);
pub struct CtmcProcess;
pub struct SdeProcess(pub Transmission);

impl ProcessModel for OdeProcess {
    fn name(&self) -> &str {
        match self.0 {
            Transmission::Direct => "direct-ode",
            Transmission::Indirect => "indirect-ode",
        }
    }

    fn label(&self) -> &str {
        match self.0 {
            Transmission::Direct => "Direct ODE",
            Transmission::Indirect => "Indirect ODE",
        }
    }

    fn transmission(&self) -> Transmission {
        self.0
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn simulate(
        &self,
        p: &DynParams,
        x0: &StateVector,
        grid: &TimeGrid,
        env: &EnvSchedule,
        _rng: &mut SimRng,
    ) -> Result<Trajectory, SimError> {
        simulate_ode(self.0, p, x0, grid, env)
    }
}

impl ProcessModel for CtmcProcess {
    fn name(&self) -> &str {
        "direct-ctmc"
    }

    fn label(&self) -> &str {
        "Direct CTMC"
    }

    fn transmission(&self) -> Transmission {
        Transmission::Direct
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn simulate(
        &self,
        p: &DynParams,
        x0: &StateVector,
        grid: &TimeGrid,
        env: &EnvSchedule,
        rng: &mut SimRng,
    ) -> Result<Trajectory, SimError> {
        simulate_ctmc(p, x0, grid, env, rng)
    }
}

impl ProcessModel for SdeProcess {
    fn name(&self) -> &str {
        match self.0 {
            Transmission::Direct => "direct-sde",
            Transmission::Indirect => "indirect-sde",
        }
    }

    fn label(&self) -> &str {
        match self.0 {
            Transmission::Direct => "Direct SDE",
            Transmission::Indirect => "Indirect SDE",
        }
    }

    fn transmission(&self) -> Transmission {
        self.0
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn simulate(
        &self,
        p: &DynParams,
        x0: &StateVector,
        grid: &TimeGrid,
        env: &EnvSchedule,
        rng: &mut SimRng,
    ) -> Result<Trajectory, SimError> {
        simulate_sde(self.0, p, x0, grid, env, rng)
    }
}

pub struct BinomialData;
pub struct PoissonData;

impl DataModel for BinomialData {
    fn name(&self) -> &str {
        "binom"
    }

    fn label(&self) -> &str {
        "Binom"
    }

    fn observe(&self, traj: &Trajectory, rng: &mut SimRng) -> ObservedSeries {
        observe_binomial(traj, rng)
    }
}

impl DataModel for PoissonData {
    fn name(&self) -> &str {
        "pois"
    }

    fn label(&self) -> &str {
        "Pois"
    }

    fn observe(&self, traj: &Trajectory, rng: &mut SimRng) -> ObservedSeries {
        observe_poisson(traj, rng)
    }
}

/// Grid and known `(a, m)` schedule for one epidemic.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicContext {
    pub grid: TimeGrid,
    pub env: EnvSchedule,
}

/// One candidate model: a process model paired with a data model.
#[derive(Clone)]
pub struct ModelSpec {
    /// 1-based position in the model menu.
    pub index: usize,
    pub process: Arc<dyn ProcessModel>,
    pub data: Arc<dyn DataModel>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("index", &self.index)
            .field("name", &self.name())
            .finish()
    }
}

impl ModelSpec {
    pub fn name(&self) -> String {
        format!("{}-{}", self.process.name(), self.data.name())
    }

    pub fn transmission(&self) -> Transmission {
        self.process.transmission()
    }

    pub fn layout(&self, n_epidemics: usize) -> ParamLayout {
        ParamLayout::new(self.transmission(), n_epidemics)
    }

    /// Latent trajectory for every epidemic.
    pub fn simulate_latent(
        &self,
        theta: &ParamVector,
        epidemics: &[EpidemicContext],
        rng: &mut SimRng,
    ) -> Result<Vec<Trajectory>, SimError> {
        epidemics
            .iter()
            .zip(&theta.ics)
            .map(|(ctx, ic)| {
                self.process
                    .simulate(&theta.dyn_params, &ic.state(), &ctx.grid, &ctx.env, rng)
            })
            .collect()
    }

    pub fn observe_all(&self, latent: &[Trajectory], rng: &mut SimRng) -> Vec<ObservedSeries> {
        latent.iter().map(|tr| self.data.observe(tr, rng)).collect()
    }

    /// One full synthetic dataset: latent process then observation layer.
    pub fn simulate_dataset(
        &self,
        theta: &ParamVector,
        epidemics: &[EpidemicContext],
        rng: &mut SimRng,
    ) -> Result<Vec<ObservedSeries>, SimError> {
        let latent = self.simulate_latent(theta, epidemics, rng)?;
        Ok(self.observe_all(&latent, rng))
    }
}

/// Named process and data models, selectable at runtime.
pub struct ModelRegistry {
    processes: BTreeMap<String, Arc<dyn ProcessModel>>,
    process_order: Vec<String>,
    data: BTreeMap<String, Arc<dyn DataModel>>,
    data_order: Vec<String>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            processes: BTreeMap::new(),
            process_order: Vec::new(),
            data: BTreeMap::new(),
            data_order: Vec::new(),
        }
    }

    /// The five process models and two data models.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register_process(Arc::new(OdeProcess(Transmission::Direct)));
        reg.register_process(Arc::new(CtmcProcess));
        reg.register_process(Arc::new(SdeProcess(Transmission::Direct)));
        reg.register_process(Arc::new(OdeProcess(Transmission::Indirect)));
        reg.register_process(Arc::new(SdeProcess(Transmission::Indirect)));
        reg.register_data(Arc::new(BinomialData));
        reg.register_data(Arc::new(PoissonData));
        reg
    }

    /// Registers (or replaces) a process model under its name.
    pub fn register_process(&mut self, model: Arc<dyn ProcessModel>) {
        let name = model.name().to_string();
        if self.processes.insert(name.clone(), model).is_none() {
            self.process_order.push(name);
        }
    }

    pub fn register_data(&mut self, model: Arc<dyn DataModel>) {
        let name = model.name().to_string();
        if self.data.insert(name.clone(), model).is_none() {
            self.data_order.push(name);
        }
    }

    pub fn process_names(&self) -> &[String] {
        &self.process_order
    }

    pub fn data_names(&self) -> &[String] {
        &self.data_order
    }

    pub fn process(&self, name: &str) -> Result<Arc<dyn ProcessModel>, RegistryError> {
        self.processes
            .get(name)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownProcess(name.to_string()))
    }

    pub fn data(&self, name: &str) -> Result<Arc<dyn DataModel>, RegistryError> {
        self.data
            .get(name)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownData(name.to_string()))
    }

    /// Resolves `<process>-<data>`; the index is set by [`Self::menu`].
    pub fn model(&self, name: &str) -> Result<ModelSpec, RegistryError> {
        let (process, data) = name
            .rsplit_once('-')
            .ok_or_else(|| RegistryError::UnknownModel(name.to_string()))?;
        let process = self
            .process(process)
            .map_err(|_| RegistryError::UnknownModel(name.to_string()))?;
        let data = self
            .data(data)
            .map_err(|_| RegistryError::UnknownModel(name.to_string()))?;
        Ok(ModelSpec {
            index: 1,
            process,
            data,
        })
    }

    /// Model menu in the given order, indexed from 1. Duplicates are allowed.
    pub fn menu<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<ModelSpec>, RegistryError> {
        if names.is_empty() {
            return Err(RegistryError::EmptyMenu);
        }
        names
            .iter()
            .enumerate()
            .map(|(k, n)| {
                self.model(n.as_ref()).map(|mut m| {
                    m.index = k + 1;
                    m
                })
            })
            .collect()
    }

    /// Every data model crossed with every process model, data model outermost.
    pub fn full_menu_names(&self) -> Vec<String> {
        self.data_order
            .iter()
            .flat_map(|d| self.process_order.iter().map(move |p| format!("{p}-{d}")))
            .collect()
    }

    pub fn full_menu(&self) -> Vec<ModelSpec> {
        self.menu(&self.full_menu_names())
            .expect("registered names resolve")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_menu_has_ten_models() {
        let reg = ModelRegistry::builtin();
        let menu = reg.full_menu();
        assert_eq!(menu.len(), 10);
        assert_eq!(menu[0].name(), "direct-ode-binom");
        assert_eq!(menu[1].name(), "direct-ctmc-binom");
        assert_eq!(menu[9].name(), "indirect-sde-pois");
        assert!(menu.iter().enumerate().all(|(k, m)| m.index == k + 1));
    }

    #[test]
    fn lookup_by_name() {
        let reg = ModelRegistry::builtin();
        let m = reg.model("indirect-sde-binom").unwrap();
        assert_eq!(m.transmission(), Transmission::Indirect);
        assert!(!m.process.is_deterministic());
        assert!(reg
            .model("direct-ode-pois")
            .unwrap()
            .process
            .is_deterministic());
        assert!(matches!(
            reg.model("indirect-ctmc-binom"),
            Err(RegistryError::UnknownModel(_))
        ));
        assert!(matches!(
            reg.model("nonsense"),
            Err(RegistryError::UnknownModel(_))
        ));
        assert_eq!(reg.menu::<&str>(&[]).unwrap_err(), RegistryError::EmptyMenu);
    }

    #[test]
    fn custom_models_can_be_registered() {
        struct Exact;
        impl DataModel for Exact {
            fn name(&self) -> &str {
                "exact"
            }
            fn label(&self) -> &str {
                "Exact"
            }
            fn observe(&self, traj: &Trajectory, _rng: &mut SimRng) -> ObservedSeries {
                let c = traj.states.iter().map(|s| s.c().round() as u64).collect();
                ObservedSeries::new(&traj.times, c)
            }
        }
        let mut reg = ModelRegistry::builtin();
        reg.register_data(Arc::new(Exact));
        assert_eq!(reg.full_menu().len(), 15);
        assert_eq!(
            reg.model("direct-ode-exact").unwrap().name(),
            "direct-ode-exact"
        );
    }
}
