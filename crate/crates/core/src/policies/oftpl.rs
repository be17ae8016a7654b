use rand::Rng;

use super::schedule::PerturbationState;
use super::{check_item, check_prediction, top_c, Action, CachePolicy, PolicyError};
use crate::model::{CumulativeGradient, PredictionErrorLedger, PredictionVector, RequestEvent};

/// Optimistic FTPL: cache the `C` files with the largest perturbed scores
/// `Θ_{t−1} + θ̃_t + η_t γ`.
pub struct OftplCache<R> {
    capacity: usize,
    counts: CumulativeGradient,
    ledger: PredictionErrorLedger,
    perturbation: PerturbationState,
    rng: R,
    pending: Option<PredictionVector>,
}

impl<R: Rng + Send> OftplCache<R> {
    /// Draws γ once; with `fresh_each_slot` a new γ is drawn before every decision.
    pub fn new(n_files: usize, capacity: usize, fresh_each_slot: bool, mut rng: R) -> Result<Self, PolicyError> {
        if capacity == 0 || n_files == 0 {
            return Err(PolicyError::Config(
                "need at least one file and a positive capacity".into(),
            ));
        }
        let perturbation = PerturbationState::new(n_files, capacity as f64, fresh_each_slot, &mut rng);
        Ok(Self {
            capacity,
            counts: CumulativeGradient::new(n_files),
            ledger: PredictionErrorLedger::default(),
            perturbation,
            rng,
            pending: None,
        })
    }

    pub fn perturbation(&self) -> &PerturbationState {
        &self.perturbation
    }

    pub fn ledger(&self) -> &PredictionErrorLedger {
        &self.ledger
    }

    pub fn counts(&self) -> &CumulativeGradient {
        &self.counts
    }
}

impl<R: Rng + Send> CachePolicy for OftplCache<R> {
    fn name(&self) -> &str {
        "oftpl"
    }

    fn decide(&mut self, prediction: &PredictionVector) -> Result<Action, PolicyError> {
        if self.pending.is_some() {
            return Err(PolicyError::DecideTwice);
        }
        check_prediction(prediction, self.counts.len())?;
        if self.perturbation.fresh_each_slot {
            self.perturbation.resample(&mut self.rng);
        }
        let mut scores = self.counts.counts().to_vec();
        prediction.add_to(&mut scores);
        self.perturbation.perturb(&mut scores);
        let set = top_c(&scores, self.capacity).into_iter().collect();
        self.pending = Some(prediction.clone());
        Ok(Action::Single(set))
    }

    fn observe(&mut self, request: &RequestEvent) -> Result<(), PolicyError> {
        check_item(request.file, self.counts.len())?;
        let prediction = self
            .pending
            .take()
            .ok_or(PolicyError::ObserveBeforeDecide(request.slot))?;
        self.counts.record(request.file);
        self.ledger.record(request.file, &prediction);
        self.perturbation.eta_update(&self.ledger);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictions_follow_the_prescient_leader() {
        let mut p = OftplCache::new(20, 3, false, ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut counts = vec![0.0; 20];
        for t in 0..500u64 {
            let f = ((t * 13) % 17 + t % 3) as usize;
            let action = p.decide(&PredictionVector::one_hot(f)).unwrap();
            counts[f] += 1.0;
            let expected: crate::model::IntegralCacheSet = top_c(&counts, 3).into_iter().collect();
            assert_eq!(action.as_single().unwrap(), &expected);
            p.observe(&RequestEvent::new(t, f)).unwrap();
            assert_eq!(p.perturbation().eta, 0.0);
        }
    }

    #[test]
    fn fresh_perturbation_changes_gamma() {
        let mut p = OftplCache::new(10, 2, true, ChaCha8Rng::seed_from_u64(1)).unwrap();
        let before = p.perturbation().gamma.clone();
        p.decide(&PredictionVector::null()).unwrap();
        assert_ne!(before, p.perturbation().gamma);
    }

    #[test]
    fn eta_grows_with_misses() {
        let mut p = OftplCache::new(10, 2, false, ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut last = 0.0;
        for t in 0..20 {
            p.decide(&PredictionVector::one_hot(0)).unwrap();
            p.observe(&RequestEvent::new(t, 1)).unwrap();
            assert!(p.perturbation().eta > last);
            last = p.perturbation().eta;
        }
    }
}
