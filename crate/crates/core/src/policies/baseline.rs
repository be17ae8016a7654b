use super::{Action, CachePolicy, PolicyError};
use crate::model::{PredictionVector, RequestEvent};

/// Runs an optimistic policy with the prediction replaced by the null
/// prediction, which recovers its non-optimistic counterpart.
pub struct NullPrediction<P> {
    inner: P,
    name: String,
}

impl<P: CachePolicy> NullPrediction<P> {
    pub fn new(inner: P, name: impl Into<String>) -> Self {
        Self {
            inner,
            name: name.into(),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: CachePolicy> CachePolicy for NullPrediction<P> {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, _prediction: &PredictionVector) -> Result<Action, PolicyError> {
        self.inner.decide(&PredictionVector::null())
    }

    fn observe(&mut self, request: &RequestEvent) -> Result<(), PolicyError> {
        self.inner.observe(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{OftplCache, OftrlCache};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ftrl_sigma_follows_sqrt_t() {
        let mut p = NullPrediction::new(OftrlCache::new(12, 4, ChaCha8Rng::seed_from_u64(1)).unwrap(), "ftrl");
        for t in 1..=30u64 {
            p.decide(&PredictionVector::one_hot(3)).unwrap();
            p.observe(&RequestEvent::new(t, 3)).unwrap();
            assert!((p.inner().schedule().sigma_cum - (t as f64).sqrt() / 2.0).abs() < 1e-9);
        }
        assert_eq!(p.name(), "ftrl");
    }

    #[test]
    fn ftpl_ignores_prediction_content() {
        let mk = || {
            NullPrediction::new(
                OftplCache::new(15, 3, false, ChaCha8Rng::seed_from_u64(2)).unwrap(),
                "ftpl",
            )
        };
        let (mut a, mut b) = (mk(), mk());
        for t in 0..100u64 {
            let f = (t * t % 15) as usize;
            let x = a.decide(&PredictionVector::one_hot(f)).unwrap();
            let y = b.decide(&PredictionVector::one_hot((f + 4) % 15)).unwrap();
            assert_eq!(x, y);
            a.observe(&RequestEvent::new(t, f)).unwrap();
            b.observe(&RequestEvent::new(t, f)).unwrap();
        }
    }
}
