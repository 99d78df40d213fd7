//! Observation layer: latent cumulative deaths `C` to observed counts `C̃`.

use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;
use crate::simulate::Trajectory;

/// Observed cumulative CWD deaths for one epidemic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedSeries {
    pub times: Vec<OrderedTime>,
    pub c_tilde: Vec<u64>,
}

/// Observation time stored bit-exactly so series compare with `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedTime(u64);

impl OrderedTime {
    pub fn new(t: f64) -> Self {
        Self(t.to_bits())
    }

    pub fn get(self) -> f64 {
        f64::from_bits(self.0)
    }
}

impl From<f64> for OrderedTime {
    fn from(t: f64) -> Self {
        Self::new(t)
    }
}

impl ObservedSeries {
    pub fn new(times: &[f64], c_tilde: Vec<u64>) -> Self {
        assert_eq!(
            times.len(),
            c_tilde.len(),
            "times and counts differ in length"
        );
        Self {
            times: times.iter().copied().map(OrderedTime::new).collect(),
            c_tilde,
        }
    }

    pub fn times_f64(&self) -> Vec<f64> {
        self.times.iter().map(|t| t.get()).collect()
    }

    pub fn len(&self) -> usize {
        self.c_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_tilde.is_empty()
    }
}

/// Rounded `(N, C)` with `C ≤ N`, where `N = S + I + C`.
fn rounded_counts(s: f64, i: f64, c: f64) -> (u64, u64) {
    let n = (s.max(0.0) + i.max(0.0) + c.max(0.0)).round();
    let c = c.max(0.0).round().min(n);
    (n as u64, c as u64)
}

/// `C̃ ~ Binomial(N, C/N)` at each time; `N` excludes environmental mass.
pub fn observe_binomial(traj: &Trajectory, rng: &mut SimRng) -> ObservedSeries {
    let counts = traj
        .states
        .iter()
        .map(|x| {
            let (n, c) = rounded_counts(x.s(), x.i(), x.c());
            if n == 0 || c == 0 {
                return 0;
            }
            if c == n {
                return n;
            }
            let p = (c as f64 / n as f64).clamp(0.0, 1.0);
            Binomial::new(n, p)
                .expect("probability clamped into [0, 1]")
                .sample(rng)
        })
        .collect();
    ObservedSeries::new(&traj.times, counts)
}

/// Means above this are returned as the rounded mean; the sampler cannot
/// handle them and the relative spread is below 1e-7.
pub const POISSON_SAMPLING_LIMIT: f64 = 1e14;

/// `C̃ ~ Poisson(C)` at each time. Counts may exceed `N`.
pub fn observe_poisson(traj: &Trajectory, rng: &mut SimRng) -> ObservedSeries {
    let counts = traj
        .states
        .iter()
        .map(|x| {
            let lambda = x.c();
            if !(lambda > 0.0) {
                return 0;
            }
            if lambda > POISSON_SAMPLING_LIMIT {
                return lambda.round() as u64;
            }
            let draw: f64 = Poisson::new(lambda)
                .expect("positive finite mean")
                .sample(rng);
            draw as u64
        })
        .collect();
    ObservedSeries::new(&traj.times, counts)
}
