//! Priors, random-walk proposal kernels and the parameter vector they act on.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::dynamics::{DynParams, StateVector, Transmission};
use crate::rng::SimRng;

/// Univariate prior. Gamma uses the shape–rate parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum Prior {
    Beta { alpha: f64, beta: f64 },
    Gamma { shape: f64, rate: f64 },
    Uniform { low: f64, high: f64 },
    DiscreteUniform { low: i64, high: i64 },
}

impl Prior {
    pub fn is_discrete(&self) -> bool {
        matches!(self, Prior::DiscreteUniform { .. })
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            Prior::Beta { alpha, beta } => {
                alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()
            }
            Prior::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            Prior::Uniform { low, high } => low < high && low.is_finite() && high.is_finite(),
            Prior::DiscreteUniform { low, high } => low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid prior hyperparameters: {self:?}"))
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            Prior::Beta { alpha, beta } => {
                BetaDist::new(alpha, beta).expect("validated").sample(rng)
            }
            Prior::Gamma { shape, rate } => GammaDist::new(shape, 1.0 / rate)
                .expect("validated")
                .sample(rng),
            Prior::Uniform { low, high } => rng.random_range(low..=high),
            Prior::DiscreteUniform { low, high } => rng.random_range(low..=high) as f64,
        }
    }

    /// Log density (log mass for the discrete case); `-∞` off support.
    pub fn ln_density(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        match *self {
            Prior::Beta { alpha, beta } => {
                if x <= 0.0 || x >= 1.0 {
                    return f64::NEG_INFINITY;
                }
                (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_beta(alpha, beta)
            }
            Prior::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Prior::Uniform { low, high } => {
                if x < low || x > high {
                    f64::NEG_INFINITY
                } else {
                    -(high - low).ln()
                }
            }
            Prior::DiscreteUniform { low, high } => {
                if x.fract() != 0.0 || x < low as f64 || x > high as f64 {
                    f64::NEG_INFINITY
                } else {
                    -((high - low + 1) as f64).ln()
                }
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }
}

/// Random-walk increment distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// `N(0, sd²)`; `sd = 0` leaves the value unchanged.
    Normal { sd: f64 },
    /// `U(-half_width, half_width)`.
    Uniform { half_width: f64 },
    /// Uniform over the integers `-half_width..=half_width`.
    DiscreteUniform { half_width: i64 },
}

impl Kernel {
    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            Kernel::Normal { sd } => sd >= 0.0 && sd.is_finite(),
            Kernel::Uniform { half_width } => half_width > 0.0 && half_width.is_finite(),
            Kernel::DiscreteUniform { half_width } => half_width >= 0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid proposal kernel: {self:?}"))
        }
    }

    pub fn sample_increment(&self, rng: &mut SimRng) -> f64 {
        match *self {
            Kernel::Normal { sd } if sd == 0.0 => 0.0,
            Kernel::Normal { sd } => Normal::new(0.0, sd).expect("validated").sample(rng),
            Kernel::Uniform { half_width } => rng.random_range(-half_width..=half_width),
            Kernel::DiscreteUniform { half_width } => {
                rng.random_range(-half_width..=half_width) as f64
            }
        }
    }

    /// Density (or mass) of the increment `d`.
    pub fn density(&self, d: f64) -> f64 {
        match *self {
            Kernel::Normal { sd } if sd == 0.0 => {
                if d == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Normal { sd } => {
                let z = d / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Kernel::Uniform { half_width } => {
                if d.abs() <= half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            Kernel::DiscreteUniform { half_width } => {
                if d.fract() == 0.0 && d.abs() <= half_width as f64 {
                    1.0 / (2 * half_width + 1) as f64
                } else {
                    0.0
                }
            }
        }
    }
}

/// Which parameters a model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamLayout {
    pub transmission: Transmission,
    pub n_epidemics: usize,
}

impl ParamLayout {
    pub fn new(transmission: Transmission, n_epidemics: usize) -> Self {
        Self {
            transmission,
            n_epidemics,
        }
    }

    pub fn components(&self) -> Vec<ParamId> {
        let mut out = match self.transmission {
            Transmission::Direct => vec![ParamId::Beta, ParamId::Mu],
            Transmission::Indirect => {
                vec![ParamId::Gamma, ParamId::Mu, ParamId::Epsilon, ParamId::Tau]
            }
        };
        for k in 0..self.n_epidemics {
            out.push(ParamId::S0(k));
            out.push(ParamId::I0(k));
            if self.transmission == Transmission::Indirect {
                out.push(ParamId::E0(k));
            }
        }
        out
    }
}

/// Named scalar in a [`ParamVector`]. Epidemic indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamId {
    Beta,
    Mu,
    Gamma,
    Epsilon,
    Tau,
    S0(usize),
    I0(usize),
    E0(usize),
}

impl ParamId {
    /// Column name; epidemics are numbered from 1.
    pub fn name(&self) -> String {
        match self {
            ParamId::Beta => "beta".into(),
            ParamId::Mu => "mu".into(),
            ParamId::Gamma => "gamma".into(),
            ParamId::Epsilon => "epsilon".into(),
            ParamId::Tau => "tau".into(),
            ParamId::S0(k) => format!("S0_{}", k + 1),
            ParamId::I0(k) => format!("I0_{}", k + 1),
            ParamId::E0(k) => format!("E0_{}", k + 1),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        let epidemic = |rest: &str| {
            rest.parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .map(|k| k - 1)
        };
        Some(match name {
            "beta" => ParamId::Beta,
            "mu" => ParamId::Mu,
            "gamma" => ParamId::Gamma,
            "epsilon" => ParamId::Epsilon,
            "tau" => ParamId::Tau,
            _ => {
                if let Some(r) = name.strip_prefix("S0_") {
                    ParamId::S0(epidemic(r)?)
                } else if let Some(r) = name.strip_prefix("I0_") {
                    ParamId::I0(epidemic(r)?)
                } else if let Some(r) = name.strip_prefix("E0_") {
                    ParamId::E0(epidemic(r)?)
                } else {
                    return None;
                }
            }
        })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ParamId::S0(_) | ParamId::I0(_))
    }
}

/// Initial conditions of one epidemic; `C(t0) = 0` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub s0: i64,
    pub i0: i64,
    pub e0: Option<f64>,
}

impl InitialConditions {
    pub fn state(&self) -> StateVector {
        match self.e0 {
            None => StateVector::direct(self.s0 as f64, self.i0 as f64, 0.0),
            Some(e) => StateVector::indirect(self.s0 as f64, self.i0 as f64, e, 0.0),
        }
    }
}

/// Shared disease parameters plus per-epidemic initial conditions. Parameters
/// a model does not use are held at zero and excluded from
/// [`ParamVector::components`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub layout: ParamLayout,
    pub dyn_params: DynParams,
    pub ics: Vec<InitialConditions>,
}

impl ParamVector {
    pub fn get(&self, id: ParamId) -> Option<f64> {
        let direct = self.layout.transmission == Transmission::Direct;
        let ic = |k: usize| self.ics.get(k);
        match id {
            ParamId::Beta => direct.then_some(self.dyn_params.beta),
            ParamId::Mu => Some(self.dyn_params.mu),
            ParamId::Gamma => (!direct).then_some(self.dyn_params.gamma),
            ParamId::Epsilon => (!direct).then_some(self.dyn_params.epsilon),
            ParamId::Tau => (!direct).then_some(self.dyn_params.tau),
            ParamId::S0(k) => ic(k).map(|c| c.s0 as f64),
            ParamId::I0(k) => ic(k).map(|c| c.i0 as f64),
            ParamId::E0(k) => ic(k).and_then(|c| c.e0),
        }
    }

    /// Sets a component the layout carries. Integer components are rounded.
    pub fn set(&mut self, id: ParamId, v: f64) {
        match id {
            ParamId::Beta => self.dyn_params.beta = v,
            ParamId::Mu => self.dyn_params.mu = v,
            ParamId::Gamma => self.dyn_params.gamma = v,
            ParamId::Epsilon => self.dyn_params.epsilon = v,
            ParamId::Tau => self.dyn_params.tau = v,
            ParamId::S0(k) => self.ics[k].s0 = v.round() as i64,
            ParamId::I0(k) => self.ics[k].i0 = v.round() as i64,
            ParamId::E0(k) => self.ics[k].e0 = Some(v),
        }
    }

    pub fn components(&self) -> Vec<(ParamId, f64)> {
        self.layout
            .components()
            .into_iter()
            .map(|id| (id, self.get(id).expect("layout component present")))
            .collect()
    }

    /// All-zero vector with the given layout.
    pub fn zeroed(layout: ParamLayout) -> Self {
        let e0 = (layout.transmission == Transmission::Indirect).then_some(0.0);
        Self {
            layout,
            dyn_params: DynParams::default(),
            ics: vec![InitialConditions { s0: 0, i0: 0, e0 }; layout.n_epidemics],
        }
    }
}

/// Prior for every parameter and initial condition. Initial-condition priors
/// apply independently to each epidemic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub beta: Prior,
    pub mu: Prior,
    pub gamma: Prior,
    pub epsilon: Prior,
    pub tau: Prior,
    pub s0: Prior,
    pub i0: Prior,
    pub e0: Prior,
}

impl PriorSpec {
    const INITIAL: (Prior, Prior, Prior) = (
        Prior::DiscreteUniform { low: 10, high: 50 },
        Prior::DiscreteUniform { low: 0, high: 20 },
        Prior::Uniform {
            low: 0.0,
            high: 6.0,
        },
    );

    pub fn informative1() -> Self {
        let (s0, i0, e0) = Self::INITIAL;
        Self {
            beta: Prior::Beta {
                alpha: 2.0,
                beta: 10.0,
            },
            mu: Prior::Beta {
                alpha: 2.0,
                beta: 5.0,
            },
            gamma: Prior::Gamma {
                shape: 0.01,
                rate: 0.01,
            },
            epsilon: Prior::Beta {
                alpha: 2.0,
                beta: 2.0,
            },
            tau: Prior::Gamma {
                shape: 0.01,
                rate: 0.01,
            },
            s0,
            i0,
            e0,
        }
    }

    pub fn informative2() -> Self {
        let (s0, i0, e0) = Self::INITIAL;
        let unit = Prior::Uniform {
            low: 0.0,
            high: 1.0,
        };
        let wide = Prior::Uniform {
            low: 0.0,
            high: 20.0,
        };
        Self {
            beta: unit,
            mu: unit,
            gamma: wide,
            epsilon: unit,
            tau: wide,
            s0,
            i0,
            e0,
        }
    }

    pub fn noninformative() -> Self {
        let (s0, i0, e0) = Self::INITIAL;
        let g = Prior::Gamma {
            shape: 0.1,
            rate: 0.1,
        };
        Self {
            beta: g,
            mu: g,
            gamma: g,
            epsilon: g,
            tau: g,
            s0,
            i0,
            e0,
        }
    }

    /// Built-in preset by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "informative1" => Some(Self::informative1()),
            "informative2" => Some(Self::informative2()),
            "noninformative" => Some(Self::noninformative()),
            _ => None,
        }
    }

    pub fn prior_for(&self, id: ParamId) -> &Prior {
        match id {
            ParamId::Beta => &self.beta,
            ParamId::Mu => &self.mu,
            ParamId::Gamma => &self.gamma,
            ParamId::Epsilon => &self.epsilon,
            ParamId::Tau => &self.tau,
            ParamId::S0(_) => &self.s0,
            ParamId::I0(_) => &self.i0,
            ParamId::E0(_) => &self.e0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for p in [
            self.beta,
            self.mu,
            self.gamma,
            self.epsilon,
            self.tau,
            self.e0,
        ] {
            p.validate()?;
        }
        for p in [self.s0, self.i0] {
            p.validate()?;
            if !p.is_discrete() {
                return Err("S0 and I0 priors must be discrete_uniform".into());
            }
        }
        if self.e0.is_discrete() {
            return Err("E0 prior must be continuous".into());
        }
        Ok(())
    }
}

/// Random-walk kernel for every parameter and initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalSpec {
    pub beta: Kernel,
    pub mu: Kernel,
    pub gamma: Kernel,
    pub epsilon: Kernel,
    pub tau: Kernel,
    pub s0: Kernel,
    pub i0: Kernel,
    pub e0: Kernel,
}

impl Default for ProposalSpec {
    fn default() -> Self {
        Self {
            beta: Kernel::Normal { sd: 0.02 },
            mu: Kernel::Normal { sd: 0.2 },
            gamma: Kernel::Normal { sd: 0.2 },
            epsilon: Kernel::Normal { sd: 0.2 },
            tau: Kernel::Normal { sd: 2.0 },
            s0: Kernel::DiscreteUniform { half_width: 8 },
            i0: Kernel::DiscreteUniform { half_width: 3 },
            e0: Kernel::Uniform { half_width: 1.0 },
        }
    }
}

impl ProposalSpec {
    pub fn kernel_for(&self, id: ParamId) -> &Kernel {
        match id {
            ParamId::Beta => &self.beta,
            ParamId::Mu => &self.mu,
            ParamId::Gamma => &self.gamma,
            ParamId::Epsilon => &self.epsilon,
            ParamId::Tau => &self.tau,
            ParamId::S0(_) => &self.s0,
            ParamId::I0(_) => &self.i0,
            ParamId::E0(_) => &self.e0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for k in [
            self.beta,
            self.mu,
            self.gamma,
            self.epsilon,
            self.tau,
            self.e0,
        ] {
            k.validate()?;
        }
        for k in [self.s0, self.i0] {
            k.validate()?;
            if !matches!(k, Kernel::DiscreteUniform { .. }) {
                return Err("S0 and I0 kernels must be discrete_uniform".into());
            }
        }
        if matches!(self.e0, Kernel::DiscreteUniform { .. }) {
            return Err("E0 kernel must be continuous".into());
        }
        Ok(())
    }
}

/// Independent prior draw of every component the layout carries.
pub fn prior_sample(spec: &PriorSpec, layout: ParamLayout, rng: &mut SimRng) -> ParamVector {
    let mut theta = ParamVector::zeroed(layout);
    for id in layout.components() {
        let v = spec.prior_for(id).sample(rng);
        theta.set(id, v);
    }
    theta
}

pub fn ln_prior_density(spec: &PriorSpec, theta: &ParamVector) -> f64 {
    theta
        .components()
        .into_iter()
        .map(|(id, v)| spec.prior_for(id).ln_density(v))
        .sum()
}

/// Product of marginal prior densities; zero off support.
pub fn prior_density(spec: &PriorSpec, theta: &ParamVector) -> f64 {
    ln_prior_density(spec, theta).exp()
}

/// Componentwise random-walk perturbation of `theta_star`.
pub fn proposal_sample(
    spec: &ProposalSpec,
    theta_star: &ParamVector,
    rng: &mut SimRng,
) -> ParamVector {
    let mut out = theta_star.clone();
    for (id, v) in theta_star.components() {
        let step = spec.kernel_for(id).sample_increment(rng);
        out.set(id, v + step);
    }
    out
}

/// Density of moving from `theta_from` to `theta_to`.
pub fn proposal_density(
    spec: &ProposalSpec,
    theta_to: &ParamVector,
    theta_from: &ParamVector,
) -> f64 {
    debug_assert_eq!(theta_to.layout, theta_from.layout);
    let mut dens = 1.0;
    for (id, to) in theta_to.components() {
        let from = theta_from.get(id).expect("matching layouts");
        dens *= spec.kernel_for(id).density(to - from);
        if dens == 0.0 {
            break;
        }
    }
    dens
}
