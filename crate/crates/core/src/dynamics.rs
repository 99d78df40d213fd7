//! Process-model right-hand sides for the direct and indirect transmission
//! families: drift vectors, diffusion covariances and the CTMC event table.
//!
//! State ordering is `(S, I, C)` for direct transmission and
//! `(S, I, E, C)` for indirect transmission. Every function clamps negative
//! state components to zero before evaluating rates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SymMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("state has dimension {found}, {kind} transmission expects {expected}")]
    DimensionMismatch {
        kind: Transmission,
        expected: usize,
        found: usize,
    },
    #[error("no CTMC formulation exists for {0} transmission")]
    UnsupportedModel(Transmission),
}

/// Transmission mechanism, which fixes the state layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transmission {
    Direct,
    Indirect,
}

impl Transmission {
    pub const fn dim(self) -> usize {
        match self {
            Transmission::Direct => 3,
            Transmission::Indirect => 4,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Transmission::Direct => "direct",
            Transmission::Indirect => "indirect",
        }
    }
}

impl std::fmt::Display for Transmission {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Latent compartment values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    values: [f64; 4],
    dim: usize,
}

impl StateVector {
    pub fn direct(s: f64, i: f64, c: f64) -> Self {
        Self {
            values: [s, i, c, 0.0],
            dim: 3,
        }
    }

    pub fn indirect(s: f64, i: f64, e: f64, c: f64) -> Self {
        Self {
            values: [s, i, e, c],
            dim: 4,
        }
    }

    pub fn zeros(kind: Transmission) -> Self {
        Self {
            values: [0.0; 4],
            dim: kind.dim(),
        }
    }

    /// Builds a state from a slice of length 3 or 4.
    pub fn from_slice(values: &[f64]) -> Option<Self> {
        match values.len() {
            3 => Some(Self::direct(values[0], values[1], values[2])),
            4 => Some(Self::indirect(values[0], values[1], values[2], values[3])),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transmission(&self) -> Transmission {
        if self.dim == 3 {
            Transmission::Direct
        } else {
            Transmission::Indirect
        }
    }

    pub fn s(&self) -> f64 {
        self.values[0]
    }

    pub fn i(&self) -> f64 {
        self.values[1]
    }

    /// Environmental infectious mass, present only for indirect states.
    pub fn e(&self) -> Option<f64> {
        (self.dim == 4).then_some(self.values[2])
    }

    pub fn c(&self) -> f64 {
        self.values[self.dim - 1]
    }

    /// Animals alive or dead from CWD; `E` is a mass and is excluded.
    pub fn animals(&self) -> f64 {
        self.s() + self.i() + self.c()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values[..self.dim]
    }

    pub fn clamped(&self) -> Self {
        let mut out = *self;
        out.clamp_nonnegative();
        out
    }

    pub fn clamp_nonnegative(&mut self) {
        for v in self.as_mut_slice() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    fn check(&self, kind: Transmission) -> Result<(), DynamicsError> {
        if self.dim != kind.dim() {
            return Err(DynamicsError::DimensionMismatch {
                kind,
                expected: kind.dim(),
                found: self.dim,
            });
        }
        Ok(())
    }
}

/// Disease parameters shared by both epidemics. Each model reads only the
/// subset its equations use.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynParams {
    pub beta: f64,
    pub mu: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub tau: f64,
}

/// Known additions rate `a` and natural mortality `m` for one year.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Environment {
    pub a: f64,
    pub m: f64,
}

impl Environment {
    pub const fn new(a: f64, m: f64) -> Self {
        Self { a, m }
    }
}

/// Piecewise-constant `(a, m)` over time. Segment `k` applies on
/// `[start_k, start_{k+1})`; the last segment extends indefinitely and times
/// before the first start use the first segment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSchedule {
    starts: Vec<f64>,
    envs: Vec<Environment>,
}

impl EnvSchedule {
    pub fn constant(env: Environment) -> Self {
        Self {
            starts: vec![0.0],
            envs: vec![env],
        }
    }

    /// Segments must have strictly increasing start times.
    pub fn piecewise(segments: Vec<(f64, Environment)>) -> Option<Self> {
        if segments.is_empty() || segments.windows(2).any(|w| w[1].0 <= w[0].0) {
            return None;
        }
        let (starts, envs) = segments.into_iter().unzip();
        Some(Self { starts, envs })
    }

    pub fn at(&self, t: f64) -> Environment {
        let idx = self.starts.partition_point(|&s| s <= t);
        self.envs[idx.saturating_sub(1)]
    }

    /// First segment boundary strictly after `t`, if any.
    pub fn next_change(&self, t: f64) -> Option<f64> {
        let idx = self.starts.partition_point(|&s| s <= t);
        self.starts.get(idx).copied()
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, Environment)> + '_ {
        self.starts.iter().copied().zip(self.envs.iter().copied())
    }
}

/// Which CTMC transition an event represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Addition,
    SusceptibleDeath,
    Infection,
    InfectedDeath,
    CwdDeath,
}

/// Direct-model transitions in `(S, I, C)` order.
pub const DIRECT_EVENT_DELTAS: [[i64; 3]; 5] =
    [[1, 0, 0], [-1, 0, 0], [-1, 1, 0], [0, -1, 0], [0, -1, 1]];

const DIRECT_EVENT_KINDS: [EventKind; 5] = [
    EventKind::Addition,
    EventKind::SusceptibleDeath,
    EventKind::Infection,
    EventKind::InfectedDeath,
    EventKind::CwdDeath,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub rate: f64,
    pub delta: [i64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTable {
    pub events: Vec<Event>,
}

impl EventTable {
    pub fn total_rate(&self) -> f64 {
        self.events.iter().map(|e| e.rate).sum()
    }
}

/// Rates of the five direct-model events, in [`DIRECT_EVENT_DELTAS`] order.
#[inline]
pub(crate) fn direct_rates(s: f64, i: f64, p: &DynParams, env: &Environment) -> [f64; 5] {
    let s = s.max(0.0);
    let i = i.max(0.0);
    [
        env.a.max(0.0),
        s * env.m,
        p.beta * s * i,
        i * env.m,
        i * p.mu,
    ]
}

/// Deterministic rate of change.
pub fn drift(
    kind: Transmission,
    x: &StateVector,
    p: &DynParams,
    env: &Environment,
) -> Result<StateVector, DynamicsError> {
    x.check(kind)?;
    Ok(drift_unchecked(x, p, env))
}

#[inline]
pub(crate) fn drift_unchecked(x: &StateVector, p: &DynParams, env: &Environment) -> StateVector {
    let x = x.clamped();
    let (a, m) = (env.a, env.m);
    let (s, i) = (x.s(), x.i());
    match x.e() {
        None => StateVector::direct(
            a - s * (p.beta * i + m),
            p.beta * s * i - i * (p.mu + m),
            p.mu * i,
        ),
        Some(e) => StateVector::indirect(
            a - s * (p.gamma * e + m),
            p.gamma * s * e - i * (p.mu + m),
            p.epsilon * i - p.tau * e,
            p.mu * i,
        ),
    }
}

/// Diffusion covariance `Σ` of the SDE approximation.
pub fn diffusion_cov(
    kind: Transmission,
    x: &StateVector,
    p: &DynParams,
    env: &Environment,
) -> Result<SymMatrix, DynamicsError> {
    x.check(kind)?;
    Ok(diffusion_cov_unchecked(x, p, env))
}

#[inline]
pub(crate) fn diffusion_cov_unchecked(
    x: &StateVector,
    p: &DynParams,
    env: &Environment,
) -> SymMatrix {
    let x = x.clamped();
    let (a, m) = (env.a.max(0.0), env.m);
    let (s, i) = (x.s(), x.i());
    match x.e() {
        None => {
            let inf = p.beta * s * i;
            let mut sig = SymMatrix::zeros(3);
            sig.set(0, 0, a + s * (p.beta * i + m));
            sig.set_sym(0, 1, -inf);
            sig.set(1, 1, inf + i * (p.mu + m));
            sig.set_sym(1, 2, -p.mu * i);
            sig.set(2, 2, p.mu * i);
            sig
        }
        Some(e) => {
            let inf = p.gamma * s * e;
            let mut sig = SymMatrix::zeros(4);
            sig.set(0, 0, a + s * (p.gamma * e + m));
            sig.set_sym(0, 1, -inf);
            sig.set(1, 1, inf + i * (p.mu + m));
            sig.set_sym(1, 3, -p.mu * i);
            sig.set(2, 2, p.epsilon * i + p.tau * e);
            sig.set(3, 3, p.mu * i);
            sig
        }
    }
}

/// CTMC event table for the direct model.
pub fn ctmc_events(
    x: &StateVector,
    p: &DynParams,
    env: &Environment,
) -> Result<EventTable, DynamicsError> {
    if x.transmission() != Transmission::Direct {
        return Err(DynamicsError::UnsupportedModel(x.transmission()));
    }
    let rates = direct_rates(x.s(), x.i(), p, env);
    let events = rates
        .iter()
        .zip(DIRECT_EVENT_DELTAS.iter())
        .zip(DIRECT_EVENT_KINDS.iter())
        .map(|((&rate, &delta), &kind)| Event { kind, rate, delta })
        .collect();
    Ok(EventTable { events })
}
