use std::collections::BTreeMap;

use rand::Rng;

use super::schedule::RegularizationSchedule;
use super::{check_item, check_prediction, top_c, Action, CachePolicy, PolicyError};
use crate::model::{
    CumulativeGradient, FractionalAllocation, IntegralCacheSet, PredictionErrorLedger, PredictionVector, RequestEvent,
};
use crate::projections::{
    dykstra_project_bipartite, BipartitePoint, BipartitePolytopeSpec, DYKSTRA_MAX_ITERS, DYKSTRA_TOL,
};
use crate::rounding::madow_sample;

/// Caching decision of a bipartite network plus the routing chosen for
/// requests served so far in the slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BipartiteAction {
    pub cache_sets: Vec<IntegralCacheSet>,
    /// `(file, user) → cache` for routed requests.
    pub routing: BTreeMap<(usize, usize), usize>,
}

impl BipartiteAction {
    pub fn new(cache_sets: Vec<IntegralCacheSet>) -> Self {
        Self {
            cache_sets,
            routing: BTreeMap::new(),
        }
    }

    /// Caches connected to `user` that hold `file`, ascending.
    pub fn serving_caches<'a>(
        &'a self,
        spec: &'a BipartitePolytopeSpec,
        file: usize,
        user: usize,
    ) -> impl Iterator<Item = usize> + 'a {
        let caches: Box<dyn Iterator<Item = usize>> = if user < spec.n_users() {
            Box::new(spec.user_caches(user))
        } else {
            Box::new(std::iter::empty())
        };
        caches.filter(move |&j| self.cache_sets.get(j).is_some_and(|s| s.contains(file)))
    }

    /// Routes a request to a uniformly random serving cache and records it.
    /// Returns `None` on a miss.
    pub fn route<R: Rng + ?Sized>(
        &mut self,
        spec: &BipartitePolytopeSpec,
        file: usize,
        user: usize,
        rng: &mut R,
    ) -> Option<usize> {
        let options: Vec<usize> = self.serving_caches(spec, file, user).collect();
        if options.is_empty() {
            return None;
        }
        let j = options[rng.random_range(0..options.len())];
        self.routing.insert((file, user), j);
        Some(j)
    }

    pub fn is_feasible(&self, spec: &BipartitePolytopeSpec) -> bool {
        self.cache_sets.len() == spec.n_caches()
            && self
                .cache_sets
                .iter()
                .zip(spec.capacities())
                .all(|(s, &c)| s.len() <= c)
            && self.cache_sets.iter().all(|s| s.iter().all(|n| n < spec.n_files()))
            && self
                .routing
                .iter()
                .all(|(&(n, i), &j)| i < spec.n_users() && spec.connected(i, j) && self.cache_sets[j].contains(n))
    }
}

/// OFTRL over the lifted caching/routing polytope of a bipartite network.
/// Requests and predictions live on the item space `file · n_users + user`.
pub struct OftrlBipCache<R> {
    spec: BipartitePolytopeSpec,
    counts: CumulativeGradient,
    ledger: PredictionErrorLedger,
    schedule: RegularizationSchedule,
    rng: R,
    pending: Option<(PredictionVector, BipartitePoint, BipartiteAction)>,
    last_iterate: Option<BipartitePoint>,
    last_action: Option<BipartiteAction>,
    last_route: Option<usize>,
}

impl<R: Rng + Send> OftrlBipCache<R> {
    pub fn new(spec: BipartitePolytopeSpec, rng: R) -> Self {
        let sigma = 1.0 / (1.0 + spec.total_capacity() as f64).sqrt();
        let items = spec.n_files() * spec.n_users();
        let dim = spec.dim();
        Self {
            spec,
            counts: CumulativeGradient::new(items),
            ledger: PredictionErrorLedger::default(),
            schedule: RegularizationSchedule::new(sigma, dim),
            rng,
            pending: None,
            last_iterate: None,
            last_action: None,
            last_route: None,
        }
    }

    pub fn spec(&self) -> &BipartitePolytopeSpec {
        &self.spec
    }

    pub fn schedule(&self) -> &RegularizationSchedule {
        &self.schedule
    }

    pub fn item(&self, file: usize, user: usize) -> usize {
        file * self.spec.n_users() + user
    }

    /// Cache that served the last observed request, `None` on a miss.
    pub fn last_route(&self) -> Option<usize> {
        self.last_route
    }

    /// Action of the last completed slot including its routing.
    pub fn last_action(&self) -> Option<&BipartiteAction> {
        self.last_action.as_ref()
    }

    pub fn last_iterate(&self) -> Option<&BipartitePoint> {
        self.pending.as_ref().map(|(_, x, _)| x).or(self.last_iterate.as_ref())
    }

    /// Lifts per-(file, user) scores onto the routing coordinates.
    fn lifted_gradient(&self, scores: &[f64]) -> Vec<f64> {
        let spec = &self.spec;
        let mut g = vec![0.0; spec.dim()];
        for n in 0..spec.n_files() {
            for (e, &(i, _)) in spec.edges().iter().enumerate() {
                g[spec.u_index(n, e)] = scores[self.item(n, i)];
            }
        }
        g
    }

    /// Integral maximizer of the linear score, built cache by cache in index
    /// order: each cache takes the files with the most not-yet-served score
    /// among its users.
    fn greedy_leader(&self, scores: &[f64]) -> BipartitePoint {
        let spec = &self.spec;
        let mut point = BipartitePoint::zeros(spec);
        let mut covered = vec![false; scores.len()];
        for j in 0..spec.n_caches() {
            let edges = spec.cache_edge_ids(j);
            let marginal: Vec<f64> = (0..spec.n_files())
                .map(|n| {
                    edges
                        .iter()
                        .map(|&e| {
                            let item = self.item(n, spec.edges()[e].0);
                            if covered[item] {
                                0.0
                            } else {
                                scores[item]
                            }
                        })
                        .sum()
                })
                .collect();
            for n in top_c(&marginal, spec.capacities()[j]) {
                point.coords[spec.k_index(n, j)] = 1.0;
                for &e in edges {
                    let item = self.item(n, spec.edges()[e].0);
                    if !covered[item] {
                        covered[item] = true;
                        point.coords[spec.u_index(n, e)] = 1.0;
                    }
                }
            }
        }
        point
    }

    /// Fractional iterate for a prediction over `(file, user)` items.
    pub fn fractional_iterate(&self, prediction: &PredictionVector) -> Result<BipartitePoint, PolicyError> {
        check_prediction(prediction, self.counts.len())?;
        let mut scores = self.counts.counts().to_vec();
        prediction.add_to(&mut scores);
        let gradient = self.lifted_gradient(&scores);
        match self.schedule.proximal_point(&gradient) {
            Some(z) => {
                let out = dykstra_project_bipartite(
                    &BipartitePoint { coords: z },
                    &self.spec,
                    DYKSTRA_TOL,
                    DYKSTRA_MAX_ITERS,
                )?;
                Ok(out.point)
            }
            None => Ok(self.greedy_leader(&scores)),
        }
    }
}

impl<R: Rng + Send> CachePolicy for OftrlBipCache<R> {
    fn name(&self) -> &str {
        "oftrl-bip"
    }

    fn decide(&mut self, prediction: &PredictionVector) -> Result<Action, PolicyError> {
        if self.pending.is_some() {
            return Err(PolicyError::DecideTwice);
        }
        let iterate = self.fractional_iterate(prediction)?;
        let mut sets = Vec::with_capacity(self.spec.n_caches());
        for (j, &cap) in self.spec.capacities().iter().enumerate() {
            let column = FractionalAllocation::new(iterate.cache_column(&self.spec, j));
            sets.push(madow_sample(&column, cap, &mut self.rng)?);
        }
        let action = BipartiteAction::new(sets);
        self.pending = Some((prediction.clone(), iterate, action.clone()));
        Ok(Action::Bipartite(action))
    }

    fn observe(&mut self, request: &RequestEvent) -> Result<(), PolicyError> {
        let user = request.user.ok_or(PolicyError::MissingUser(request.file))?;
        check_item(request.file, self.spec.n_files())?;
        check_item(user, self.spec.n_users())?;
        let (prediction, iterate, mut action) = self
            .pending
            .take()
            .ok_or(PolicyError::ObserveBeforeDecide(request.slot))?;
        self.last_route = action.route(&self.spec, request.file, user, &mut self.rng);
        let item = self.item(request.file, user);
        self.counts.record(item);
        self.ledger.record(item, &prediction);
        self.schedule.sigma_update(&self.ledger, &iterate.coords);
        self.last_iterate = Some(iterate);
        self.last_action = Some(action);
        Ok(())
    }
}
