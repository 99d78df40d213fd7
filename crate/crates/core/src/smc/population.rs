use crate::distributions::ParamVector;

/// One accepted proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    /// 1-based index into the model menu.
    pub model: usize,
    pub theta: ParamVector,
    /// Hit count `b_t` at acceptance.
    pub hits: u32,
    /// Natural log of the unnormalized weight.
    pub ln_raw_weight: f64,
    /// Weight normalized within the particle's model.
    pub weight: f64,
}

impl Particle {
    pub fn raw_weight(&self) -> f64 {
        self.ln_raw_weight.exp()
    }
}

/// The particles accepted at one tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// 1-based generation number.
    pub generation: usize,
    pub tolerance: f64,
    pub particles: Vec<Particle>,
    /// Proposal attempts consumed to fill the generation.
    pub attempts: u64,
    pub n_models: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.particles.len() as f64 / self.attempts as f64
        }
    }

    /// Particle count per model, indexed from 0 for model 1.
    pub fn model_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_models];
        for p in &self.particles {
            counts[p.model - 1] += 1;
        }
        counts
    }

    pub fn of_model(&self, model: usize) -> impl Iterator<Item = &Particle> {
        self.particles.iter().filter(move |p| p.model == model)
    }

    /// Sum of normalized weights per model (1 for every non-empty model).
    pub fn weight_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_models];
        for p in &self.particles {
            sums[p.model - 1] += p.weight;
        }
        sums
    }

    /// Sets `weight` from `ln_raw_weight` so each model's weights sum to 1.
    pub fn normalize(&mut self) {
        for model in 1..=self.n_models {
            let max = self
                .of_model(model)
                .map(|p| p.ln_raw_weight)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let total: f64 = self
                .of_model(model)
                .map(|p| (p.ln_raw_weight - max).exp())
                .sum();
            for p in self.particles.iter_mut().filter(|p| p.model == model) {
                p.weight = (p.ln_raw_weight - max).exp() / total;
            }
        }
    }
}
