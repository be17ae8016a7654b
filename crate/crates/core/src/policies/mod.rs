//! Online caching policies.
//!
//! Every policy follows the same two-phase slot protocol: [`CachePolicy::decide`]
//! commits an action given only the history and the prediction for the
//! coming slot, then [`CachePolicy::observe`] reveals the request. Calling the
//! phases out of order is reported as a contract violation.

mod baseline;
mod bipartite;
mod experts;
mod oftpl;
mod oftrl;
mod schedule;
mod unequal;

pub use baseline::NullPrediction;
pub use bipartite::{BipartiteAction, OftrlBipCache};
pub use experts::ExpertsCache;
pub use oftpl::OftplCache;
pub use oftrl::OftrlCache;
pub use schedule::{eta_scale, PerturbationState, RegularizationSchedule};
pub use unequal::{OftplUneqCache, OftrlUneqCache};

use std::cmp::Ordering;

use thiserror::Error;

use crate::model::{IntegralCacheSet, PredictionVector, RequestEvent};
use crate::projections::{BipartitePolytopeSpec, ProjectionError};
use crate::rounding::RoundingError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Rounding(#[from] RoundingError),
    #[error("observe called before decide for slot {0}")]
    ObserveBeforeDecide(u64),
    #[error("decide called twice without an observe in between")]
    DecideTwice,
    #[error("item {item} out of range for {n_items} items")]
    ItemOutOfRange { item: usize, n_items: usize },
    #[error("request for file {0} carries no user id in bipartite mode")]
    MissingUser(usize),
    #[error("invalid policy configuration: {0}")]
    Config(String),
}

/// Action committed for one slot.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Single(IntegralCacheSet),
    Bipartite(BipartiteAction),
}

impl Action {
    /// Slot utility: 1 if the request is served from a cache, else 0.
    pub fn utility(&self, request: &RequestEvent, topology: Option<&BipartitePolytopeSpec>) -> f64 {
        let served = match (self, topology, request.user) {
            (Action::Single(set), _, _) => set.contains(request.file),
            (Action::Bipartite(action), Some(spec), Some(user)) => {
                action.serving_caches(spec, request.file, user).next().is_some()
            }
            _ => false,
        };
        if served {
            1.0
        } else {
            0.0
        }
    }

    pub fn as_single(&self) -> Option<&IntegralCacheSet> {
        match self {
            Action::Single(set) => Some(set),
            Action::Bipartite(_) => None,
        }
    }

    pub fn as_bipartite(&self) -> Option<&BipartiteAction> {
        match self {
            Action::Bipartite(action) => Some(action),
            Action::Single(_) => None,
        }
    }
}

pub trait CachePolicy: Send {
    fn name(&self) -> &str;

    /// Commits the slot action. Must not depend on the upcoming request.
    fn decide(&mut self, prediction: &PredictionVector) -> Result<Action, PolicyError>;

    /// Reveals the request of the slot that was just decided.
    fn observe(&mut self, request: &RequestEvent) -> Result<(), PolicyError>;
}

impl<P: CachePolicy + ?Sized> CachePolicy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn decide(&mut self, prediction: &PredictionVector) -> Result<Action, PolicyError> {
        (**self).decide(prediction)
    }

    fn observe(&mut self, request: &RequestEvent) -> Result<(), PolicyError> {
        (**self).observe(request)
    }
}

fn score_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b]
        .partial_cmp(&scores[a])
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

/// Indices of the `c` largest scores, ties broken by ascending index, found
/// by quickselect. The result is sorted by index.
pub fn top_c(scores: &[f64], c: usize) -> Vec<usize> {
    let c = c.min(scores.len());
    if c == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if c < idx.len() {
        idx.select_nth_unstable_by(c - 1, |&a, &b| score_order(scores, a, b));
        idx.truncate(c);
    }
    idx.sort_unstable();
    idx
}

fn check_prediction(prediction: &PredictionVector, n_items: usize) -> Result<(), PolicyError> {
    match prediction.entries().last() {
        Some(&(item, _)) if item >= n_items => Err(PolicyError::ItemOutOfRange { item, n_items }),
        _ => Ok(()),
    }
}

fn check_item(item: usize, n_items: usize) -> Result<(), PolicyError> {
    if item >= n_items {
        Err(PolicyError::ItemOutOfRange { item, n_items })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn top_c_direct_selection() {
        assert_eq!(top_c(&[5.0, 1.0, 4.0, 0.0], 2), vec![0, 2]);
        assert_eq!(top_c(&[1.0, 1.0, 1.0], 2), vec![0, 1]);
        assert_eq!(top_c(&[1.0, 2.0], 5), vec![0, 1]);
        assert!(top_c(&[1.0], 0).is_empty());
    }

    proptest! {
        #[test]
        fn top_c_matches_full_sort(scores in proptest::collection::vec(-3i32..3, 1..60), c in 1usize..20) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| score_order(&scores, a, b));
            let mut expected: Vec<usize> = order.into_iter().take(c).collect();
            expected.sort_unstable();
            prop_assert_eq!(top_c(&scores, c), expected);
        }

        #[test]
        fn top_c_is_scale_invariant(scores in proptest::collection::vec(-100.0f64..100.0, 1..40), c in 1usize..10, k in 0.01f64..50.0) {
            let scaled: Vec<f64> = scores.iter().map(|s| s * k).collect();
            prop_assert_eq!(top_c(&scores, c), top_c(&scaled, c));
        }
    }
}
