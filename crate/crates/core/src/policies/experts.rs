use rand::Rng;

use super::{check_item, check_prediction, top_c, Action, CachePolicy, PolicyError};
use crate::model::{FractionalAllocation, IntegralCacheSet, PredictionVector, RequestEvent};
use crate::projections::{project_capped_simplex, project_two_simplex};
use crate::rounding::madow_sample;

/// Meta-learner over two experts: a pessimist running projected gradient
/// ascent on past requests, and an optimist caching the predicted files.
pub struct ExpertsCache<R> {
    n_files: usize,
    capacity: usize,
    weights: (f64, f64),
    pessimist: FractionalAllocation,
    slot: u64,
    rng: R,
    pending: Option<(IntegralCacheSet, FractionalAllocation)>,
    last_mixed: Option<FractionalAllocation>,
}

impl<R: Rng + Send> ExpertsCache<R> {
    pub fn new(n_files: usize, capacity: usize, rng: R) -> Result<Self, PolicyError> {
        if capacity == 0 || n_files == 0 {
            return Err(PolicyError::Config(
                "need at least one file and a positive capacity".into(),
            ));
        }
        let start = (capacity as f64 / n_files as f64).min(1.0);
        Ok(Self {
            n_files,
            capacity,
            weights: (0.5, 0.5),
            pessimist: FractionalAllocation::new(vec![start; n_files]),
            slot: 0,
            rng,
            pending: None,
            last_mixed: None,
        })
    }

    /// Current `(pessimist, optimist)` weights.
    pub fn weights(&self) -> (f64, f64) {
        self.weights
    }

    pub fn set_weights(&mut self, weights: (f64, f64)) {
        self.weights = project_two_simplex(weights);
    }

    pub fn pessimist_point(&self) -> &FractionalAllocation {
        &self.pessimist
    }

    /// Optimist's proposal for a prediction: the `C` most likely files.
    pub fn optimist_point(&self, prediction: &PredictionVector) -> IntegralCacheSet {
        top_c(&prediction.to_dense(self.n_files), self.capacity)
            .into_iter()
            .collect()
    }

    /// Combined fractional state of the latest decision.
    pub fn last_mixed(&self) -> Option<&FractionalAllocation> {
        self.pending.as_ref().map(|(_, x)| x).or(self.last_mixed.as_ref())
    }
}

impl<R: Rng + Send> CachePolicy for ExpertsCache<R> {
    fn name(&self) -> &str {
        "experts"
    }

    fn decide(&mut self, prediction: &PredictionVector) -> Result<Action, PolicyError> {
        if self.pending.is_some() {
            return Err(PolicyError::DecideTwice);
        }
        check_prediction(prediction, self.n_files)?;
        let optimist = self.optimist_point(prediction);
        let (wp, wo) = self.weights;
        let mut mixed: Vec<f64> = self.pessimist.mass.iter().map(|z| wp * z).collect();
        for n in optimist.iter() {
            mixed[n] += wo;
        }
        for v in &mut mixed {
            *v = v.clamp(0.0, 1.0);
        }
        let mixed = FractionalAllocation::new(mixed);
        let set = madow_sample(&mixed, self.capacity, &mut self.rng)?;
        self.pending = Some((optimist, mixed));
        Ok(Action::Single(set))
    }

    fn observe(&mut self, request: &RequestEvent) -> Result<(), PolicyError> {
        check_item(request.file, self.n_files)?;
        let (optimist, mixed) = self
            .pending
            .take()
            .ok_or(PolicyError::ObserveBeforeDecide(request.slot))?;
        self.slot += 1;
        let step = 1.0 / (self.slot as f64).sqrt();

        let utility = (
            self.pessimist.mass[request.file],
            if optimist.contains(request.file) { 1.0 } else { 0.0 },
        );
        self.weights = project_two_simplex((self.weights.0 + step * utility.0, self.weights.1 + step * utility.1));

        let mut ascended = self.pessimist.mass.clone();
        ascended[request.file] += step;
        self.pessimist = project_capped_simplex(&ascended, self.capacity as f64)?;
        self.last_mixed = Some(mixed);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy(n: usize, c: usize) -> ExpertsCache<ChaCha8Rng> {
        ExpertsCache::new(n, c, ChaCha8Rng::seed_from_u64(9)).unwrap()
    }

    #[test]
    fn pessimist_weight_one_uses_its_proposal() {
        let mut p = policy(6, 2);
        p.set_weights((1.0, 0.0));
        p.decide(&PredictionVector::one_hot(5)).unwrap();
        assert_eq!(p.last_mixed().unwrap(), p.pessimist_point());
    }

    #[test]
    fn optimist_weight_one_caches_the_prediction() {
        let mut p = policy(8, 3);
        p.set_weights((0.0, 1.0));
        let action = p.decide(&PredictionVector::one_hot(5)).unwrap();
        assert!(action.as_single().unwrap().contains(5));
        assert_eq!(action.as_single().unwrap().len(), 3);
    }

    #[test]
    fn weights_stay_on_the_simplex() {
        let mut p = policy(10, 2);
        for t in 0..500u64 {
            let f = (t * 7 % 10) as usize;
            let pred = PredictionVector::one_hot(if t % 3 == 0 { f } else { (f + 1) % 10 });
            let action = p.decide(&pred).unwrap();
            assert!(action.as_single().unwrap().len() <= 2);
            p.observe(&RequestEvent::new(t, f)).unwrap();
            let (a, b) = p.weights();
            assert!(a >= 0.0 && b >= 0.0 && (a + b - 1.0).abs() < 1e-12);
            assert!(p.pessimist_point().is_feasible(&[1.0; 10], 2.0));
        }
    }

    #[test]
    fn accurate_optimist_gains_weight() {
        let mut p = policy(10, 1);
        for t in 0..200u64 {
            let f = (t % 10) as usize;
            p.decide(&PredictionVector::one_hot(f)).unwrap();
            p.observe(&RequestEvent::new(t, f)).unwrap();
        }
        assert!(p.weights().1 > 0.99);
    }
}
