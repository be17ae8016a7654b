use rand::Rng;

use super::schedule::{PerturbationState, RegularizationSchedule};
use super::{check_item, check_prediction, Action, CachePolicy, PolicyError};
use crate::model::{
    CumulativeGradient, FractionalAllocation, LibraryConfig, PredictionErrorLedger, PredictionVector, RequestEvent,
};
use crate::projections::project_weighted_capped_simplex;
use crate::rounding::{dantzig_relax, depround, rand_half, AlmostIntegralVector};

/// Dantzig's fractional knapsack restricted to items with positive profit.
/// Items with zero profit never receive mass.
fn positive_dantzig(capacity: f64, profits: &[f64], sizes: &[f64]) -> Result<AlmostIntegralVector, PolicyError> {
    let active: Vec<usize> = (0..profits.len()).filter(|&i| profits[i] > 0.0).collect();
    let sub_profits: Vec<f64> = active.iter().map(|&i| profits[i]).collect();
    let sub_sizes: Vec<f64> = active.iter().map(|&i| sizes[i]).collect();
    let (relaxed, _) = dantzig_relax(capacity, &sub_profits, &sub_sizes)?;
    let mut mass = vec![0.0; profits.len()];
    for (k, &i) in active.iter().enumerate() {
        mass[i] = relaxed.mass()[k];
    }
    Ok(AlmostIntegralVector::new(mass)?)
}

fn check_library(library: &LibraryConfig) -> Result<(), PolicyError> {
    if library.n_files() == 0 {
        return Err(PolicyError::Config("library is empty".into()));
    }
    Ok(())
}

/// OFTPL for files of unequal size: perturbed profits go through the
/// fractional knapsack, then the almost-integral solution is rounded.
pub struct OftplUneqCache<R> {
    library: LibraryConfig,
    counts: CumulativeGradient,
    ledger: PredictionErrorLedger,
    perturbation: PerturbationState,
    rng: R,
    pending: Option<PredictionVector>,
    last_relaxed: Option<AlmostIntegralVector>,
}

impl<R: Rng + Send> OftplUneqCache<R> {
    pub fn new(library: LibraryConfig, fresh_each_slot: bool, mut rng: R) -> Result<Self, PolicyError> {
        check_library(&library)?;
        let n = library.n_files();
        let perturbation = PerturbationState::new(n, library.capacity(), fresh_each_slot, &mut rng);
        Ok(Self {
            library,
            counts: CumulativeGradient::new(n),
            ledger: PredictionErrorLedger::default(),
            perturbation,
            rng,
            pending: None,
            last_relaxed: None,
        })
    }

    pub fn perturbation(&self) -> &PerturbationState {
        &self.perturbation
    }

    /// Almost-integral knapsack solution of the latest decision.
    pub fn last_relaxed(&self) -> Option<&AlmostIntegralVector> {
        self.last_relaxed.as_ref()
    }
}

impl<R: Rng + Send> CachePolicy for OftplUneqCache<R> {
    fn name(&self) -> &str {
        "oftpl-uneq"
    }

    fn decide(&mut self, prediction: &PredictionVector) -> Result<Action, PolicyError> {
        if self.pending.is_some() {
            return Err(PolicyError::DecideTwice);
        }
        check_prediction(prediction, self.counts.len())?;
        if self.perturbation.fresh_each_slot {
            self.perturbation.resample(&mut self.rng);
        }
        let mut profits = self.counts.counts().to_vec();
        prediction.add_to(&mut profits);
        self.perturbation.perturb(&mut profits);
        for p in &mut profits {
            *p = p.max(0.0);
        }
        let relaxed = positive_dantzig(self.library.capacity(), &profits, self.library.sizes())?;
        let set = rand_half(&relaxed, &mut self.rng);
        self.last_relaxed = Some(relaxed);
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

/// OFTRL for files of unequal size: the proximal point is projected onto the
/// size-weighted capped simplex, then rounded by DepRound and Rand-½.
pub struct OftrlUneqCache<R> {
    library: LibraryConfig,
    counts: CumulativeGradient,
    ledger: PredictionErrorLedger,
    schedule: RegularizationSchedule,
    rng: R,
    pending: Option<(PredictionVector, FractionalAllocation)>,
    last_iterate: Option<FractionalAllocation>,
}

impl<R: Rng + Send> OftrlUneqCache<R> {
    pub fn new(library: LibraryConfig, rng: R) -> Result<Self, PolicyError> {
        check_library(&library)?;
        let n = library.n_files();
        let sigma = 1.0 / library.capacity().sqrt();
        Ok(Self {
            library,
            counts: CumulativeGradient::new(n),
            ledger: PredictionErrorLedger::default(),
            schedule: RegularizationSchedule::new(sigma, n),
            rng,
            pending: None,
            last_iterate: None,
        })
    }

    pub fn schedule(&self) -> &RegularizationSchedule {
        &self.schedule
    }

    pub fn last_iterate(&self) -> Option<&FractionalAllocation> {
        self.pending.as_ref().map(|(_, x)| x).or(self.last_iterate.as_ref())
    }

    /// Fractional iterate for the given prediction. While no regularization
    /// has accrued the fractional knapsack leader is used.
    pub fn fractional_iterate(&self, prediction: &PredictionVector) -> Result<FractionalAllocation, PolicyError> {
        check_prediction(prediction, self.counts.len())?;
        let mut gradient = self.counts.counts().to_vec();
        prediction.add_to(&mut gradient);
        match self.schedule.proximal_point(&gradient) {
            Some(z) => Ok(project_weighted_capped_simplex(
                &z,
                self.library.sizes(),
                self.library.capacity(),
            )?),
            None => {
                let (leader, _) = dantzig_relax(self.library.capacity(), &gradient, self.library.sizes())?;
                Ok(FractionalAllocation::new(leader.mass().to_vec()))
            }
        }
    }

    /// Rounds a fractional iterate to a cache set: DepRound then Rand-½.
    pub fn round(&mut self, iterate: &FractionalAllocation) -> Result<crate::model::IntegralCacheSet, PolicyError> {
        let almost = depround(&iterate.mass, self.library.sizes(), &mut self.rng)?;
        Ok(rand_half(&almost, &mut self.rng))
    }
}

impl<R: Rng + Send> CachePolicy for OftrlUneqCache<R> {
    fn name(&self) -> &str {
        "oftrl-uneq"
    }

    fn decide(&mut self, prediction: &PredictionVector) -> Result<Action, PolicyError> {
        if self.pending.is_some() {
            return Err(PolicyError::DecideTwice);
        }
        let iterate = self.fractional_iterate(prediction)?;
        let set = self.round(&iterate)?;
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
