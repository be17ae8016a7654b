use rand::Rng;

use super::schedule::RegularizationSchedule;
use super::{check_item, check_prediction, top_c, Action, CachePolicy, PolicyError};
use crate::model::{
    CumulativeGradient, FractionalAllocation, IntegralCacheSet, PredictionErrorLedger, PredictionVector, RequestEvent,
};
use crate::projections::project_capped_simplex;
use crate::rounding::madow_sample;

/// Optimistic FTRL over the capped simplex with Madow rounding.
pub struct OftrlCache<R> {
    capacity: usize,
    counts: CumulativeGradient,
    ledger: PredictionErrorLedger,
    schedule: RegularizationSchedule,
    rng: R,
    pending: Option<(PredictionVector, FractionalAllocation)>,
    last_iterate: Option<FractionalAllocation>,
}

impl<R: Rng + Send> OftrlCache<R> {
    pub fn new(n_files: usize, capacity: usize, rng: R) -> Result<Self, PolicyError> {
        if capacity == 0 || n_files == 0 {
            return Err(PolicyError::Config(
                "need at least one file and a positive capacity".into(),
            ));
        }
        Ok(Self {
            capacity,
            counts: CumulativeGradient::new(n_files),
            ledger: PredictionErrorLedger::default(),
            schedule: RegularizationSchedule::new(1.0 / (capacity as f64).sqrt(), n_files),
            rng,
            pending: None,
            last_iterate: None,
        })
    }

    pub fn schedule(&self) -> &RegularizationSchedule {
        &self.schedule
    }

    pub fn ledger(&self) -> &PredictionErrorLedger {
        &self.ledger
    }

    /// Fractional iterate of the most recent decision.
    pub fn last_iterate(&self) -> Option<&FractionalAllocation> {
        self.pending.as_ref().map(|(_, x)| x).or(self.last_iterate.as_ref())
    }

    /// The fractional OFTRL iterate for the given prediction, without
    /// committing a decision.
    pub fn fractional_iterate(&self, prediction: &PredictionVector) -> Result<FractionalAllocation, PolicyError> {
        check_prediction(prediction, self.counts.len())?;
        let mut gradient = self.counts.counts().to_vec();
        prediction.add_to(&mut gradient);
        match self.schedule.proximal_point(&gradient) {
            Some(z) => Ok(project_capped_simplex(&z, self.capacity as f64)?),
            None => {
                let mut leader = FractionalAllocation::zeros(gradient.len());
                for i in top_c(&gradient, self.capacity) {
                    leader.mass[i] = 1.0;
                }
                Ok(leader)
            }
        }
    }
}

impl<R: Rng + Send> CachePolicy for OftrlCache<R> {
    fn name(&self) -> &str {
        "oftrl"
    }

    fn decide(&mut self, prediction: &PredictionVector) -> Result<Action, PolicyError> {
        if self.pending.is_some() {
            return Err(PolicyError::DecideTwice);
        }
        let iterate = self.fractional_iterate(prediction)?;
        let set: IntegralCacheSet = madow_sample(&iterate, self.capacity, &mut self.rng)?;
        self.pending = Some((prediction.clone(), iterate));
        Ok(Action::Single(set))
    }

    fn observe(&mut self, request: &RequestEvent) -> Result<(), PolicyError> {
        check_item(request.file, self.counts.len())?;
        let (prediction, iterate) = self
            .pending
            .take()
            .ok_or(PolicyError::ObserveBeforeDecide(request.slot))?;
        self.counts.record(request.file);
        self.ledger.record(request.file, &prediction);
        self.schedule.sigma_update(&self.ledger, &iterate.mass);
        self.last_iterate = Some(iterate);
        Ok(())
    }
}
