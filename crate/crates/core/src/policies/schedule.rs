use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::PredictionErrorLedger;

/// Proximal ℓ2 regularization driven by accumulated squared ℓ2 prediction
/// error: `σ_{1:t} = σ·√δ_{1:t}`, each increment `σ_t` centred at that
/// slot's fractional iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationSchedule {
    pub sigma_base: f64,
    pub sigma_cum: f64,
    /// Σ_τ σ_τ x̂_τ.
    pub anchor_weighted_sum: Vec<f64>,
}

impl RegularizationSchedule {
    pub fn new(sigma_base: f64, dim: usize) -> Self {
        Self {
            sigma_base,
            sigma_cum: 0.0,
            anchor_weighted_sum: vec![0.0; dim],
        }
    }

    /// Recomputes `σ_{1:t}` from the ledger and adds the new increment
    /// `σ_t = σ_{1:t} − σ_{1:t−1}` centred at `iterate`. Returns `σ_t`.
    pub fn sigma_update(&mut self, ledger: &PredictionErrorLedger, iterate: &[f64]) -> f64 {
        let cum = self.sigma_base * ledger.sum_l2_sq.sqrt();
        let step = cum - self.sigma_cum;
        if step != 0.0 {
            for (a, x) in self.anchor_weighted_sum.iter_mut().zip(iterate) {
                *a += step * x;
            }
        }
        self.sigma_cum = cum;
        step
    }

    /// Unconstrained maximizer of `−r_{1:t}(x) + ⟨x, g⟩`, i.e.
    /// `(Σ σ_τ x̂_τ + g) / σ_{1:t}`; `None` while `σ_{1:t} = 0`.
    pub fn proximal_point(&self, gradient: &[f64]) -> Option<Vec<f64>> {
        if self.sigma_cum <= 0.0 {
            return None;
        }
        let inv = 1.0 / self.sigma_cum;
        Some(
            self.anchor_weighted_sum
                .iter()
                .zip(gradient)
                .map(|(a, g)| (a + g) * inv)
                .collect(),
        )
    }
}

/// `(1.3/√C)·(1/ln(Ne/C))^{1/4}`, the perturbation scale per unit of
/// root accumulated squared ℓ1 error.
pub fn eta_scale(n_files: usize, capacity: f64) -> f64 {
    let log_term = (n_files as f64 * std::f64::consts::E / capacity).ln();
    1.3 / capacity.sqrt() * log_term.recip().powf(0.25)
}

/// Gaussian perturbation vector and its current scale `η_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationState {
    pub gamma: Vec<f64>,
    pub eta: f64,
    pub fresh_each_slot: bool,
    scale: f64,
}

impl PerturbationState {
    pub fn new<R: Rng + ?Sized>(n_files: usize, capacity: f64, fresh_each_slot: bool, rng: &mut R) -> Self {
        let gamma = (0..n_files).map(|_| rng.sample(StandardNormal)).collect();
        Self {
            gamma,
            eta: 0.0,
            fresh_each_slot,
            scale: eta_scale(n_files, capacity),
        }
    }

    pub fn eta_update(&mut self, ledger: &PredictionErrorLedger) -> f64 {
        self.eta = self.scale * ledger.sum_l1_sq.sqrt();
        self.eta
    }

    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for g in &mut self.gamma {
            *g = rng.sample(StandardNormal);
        }
    }

    /// Adds `η γ` to a score vector.
    pub fn perturb(&self, scores: &mut [f64]) {
        if self.eta != 0.0 {
            for (s, g) in scores.iter_mut().zip(&self.gamma) {
                *s += self.eta * g;
            }
        }
    }
}
