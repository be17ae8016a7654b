//! Shared domain types: library configuration, requests, predictions,
//! allocations and the running prediction-error ledger.

use std::collections::BTreeSet;

use thiserror::Error;

/// Slack allowed on capacity and simplex-sum checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("library must contain at least one file")]
    EmptyLibrary,
    #[error("capacity must be positive and finite, got {0}")]
    InvalidCapacity(f64),
    #[error("expected {expected} sizes, got {actual}")]
    SizeLength { expected: usize, actual: usize },
    #[error("size of file {file} is {size}, must lie in (0, capacity={capacity}]")]
    InvalidSize { file: usize, size: f64, capacity: f64 },
    #[error("prediction mass {mass} on file {file} is negative or non-finite")]
    InvalidMass { file: usize, mass: f64 },
    #[error("prediction masses sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("file id {file} out of range for a library of {n_files} files")]
    FileOutOfRange { file: usize, n_files: usize },
}

/// File library and cache capacity. Sizes are all 1 in equal-size mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryConfig {
    n_files: usize,
    capacity: f64,
    sizes: Vec<f64>,
}

impl LibraryConfig {
    pub fn equal_sizes(n_files: usize, capacity: usize) -> Result<Self, ModelError> {
        Self::with_sizes(capacity as f64, vec![1.0; n_files])
    }

    pub fn with_sizes(capacity: f64, sizes: Vec<f64>) -> Result<Self, ModelError> {
        if sizes.is_empty() {
            return Err(ModelError::EmptyLibrary);
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(ModelError::InvalidCapacity(capacity));
        }
        for (file, &size) in sizes.iter().enumerate() {
            if !(size.is_finite() && size > 0.0 && size <= capacity) {
                return Err(ModelError::InvalidSize { file, size, capacity });
            }
        }
        Ok(Self {
            n_files: sizes.len(),
            capacity,
            sizes,
        })
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// True when every file has unit size and the capacity is integral.
    pub fn is_equal_size(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1.0) && self.capacity.fract() == 0.0
    }

    /// Integral capacity in equal-size mode.
    pub fn slots(&self) -> usize {
        self.capacity.floor() as usize
    }
}

/// One slot's revealed demand: a single file, optionally tagged with the
/// requesting user location in bipartite mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RequestEvent {
    pub slot: u64,
    pub file: usize,
    pub user: Option<usize>,
}

impl RequestEvent {
    pub fn new(slot: u64, file: usize) -> Self {
        Self { slot, file, user: None }
    }

    pub fn with_user(slot: u64, file: usize, user: usize) -> Self {
        Self {
            slot,
            file,
            user: Some(user),
        }
    }
}

/// Sparse next-request distribution over an item space (files, or
/// (file, user) pairs in bipartite mode). The empty vector is the null
/// prediction used by the non-optimistic baselines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionVector {
    // sorted by item, unique, strictly positive masses
    entries: Vec<(usize, f64)>,
}

impl PredictionVector {
    pub fn null() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn one_hot(item: usize) -> Self {
        Self {
            entries: vec![(item, 1.0)],
        }
    }

    /// Builds a distribution from `(item, mass)` pairs. Duplicate items are
    /// merged and zero masses dropped; the total must be 1 within 1e-9.
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, ModelError> {
        let mut raw: Vec<(usize, f64)> = entries.into_iter().collect();
        for &(file, mass) in &raw {
            if !(mass.is_finite() && mass >= 0.0) {
                return Err(ModelError::InvalidMass { file, mass });
            }
        }
        raw.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
        for (i, m) in raw {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += m,
                _ => merged.push((i, m)),
            }
        }
        merged.retain(|&(_, m)| m > 0.0);
        let total: f64 = merged.iter().map(|&(_, m)| m).sum();
        if (total - 1.0).abs() > FEASIBILITY_TOL {
            return Err(ModelError::NotNormalized(total));
        }
        Ok(Self { entries: merged })
    }

    /// Dense constructor; `probs` must already be a distribution.
    pub fn from_dense(probs: &[f64]) -> Result<Self, ModelError> {
        Self::from_entries(probs.iter().copied().enumerate())
    }

    pub fn is_null(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn mass(&self, item: usize) -> f64 {
        self.entries
            .binary_search_by_key(&item, |&(i, _)| i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, m)| m).sum()
    }

    /// Adds the prediction into a dense score vector.
    pub fn add_to(&self, dense: &mut [f64]) {
        for &(i, m) in &self.entries {
            dense[i] += m;
        }
    }

    pub fn to_dense(&self, n_items: usize) -> Vec<f64> {
        let mut v = vec![0.0; n_items];
        self.add_to(&mut v);
        v
    }
}

/// Squared ℓ2 and squared ℓ1 distances between the one-hot request on
/// `item` and the prediction, computed over the sparse support.
pub fn error_increments(item: usize, prediction: &PredictionVector) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut l1 = 0.0;
    let mut hit_mass = 0.0;
    for &(i, m) in prediction.entries() {
        if i == item {
            hit_mass = m;
        } else {
            l2 += m * m;
            l1 += m;
        }
    }
    let gap = 1.0 - hit_mass;
    l2 += gap * gap;
    l1 += gap.abs();
    (l2, l1 * l1)
}

/// Running totals of prediction errors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PredictionErrorLedger {
    /// Σ‖θ − θ̃‖₂².
    pub sum_l2_sq: f64,
    /// Σ‖θ − θ̃‖₁².
    pub sum_l1_sq: f64,
    pub slots: u64,
}

impl PredictionErrorLedger {
    pub fn record(&mut self, item: usize, prediction: &PredictionVector) -> (f64, f64) {
        let (l2, l1) = error_increments(item, prediction);
        self.sum_l2_sq += l2;
        self.sum_l1_sq += l1;
        self.slots += 1;
        (l2, l1)
    }
}

/// Accumulated request counts Θ_t over the item space.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeGradient {
    counts: Vec<f64>,
    total: u64,
}

impl CumulativeGradient {
    pub fn new(n_items: usize) -> Self {
        Self {
            counts: vec![0.0; n_items],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<f64>) -> Self {
        Self { counts, total: 0 }
    }

    pub fn record(&mut self, item: usize) {
        self.counts[item] += 1.0;
        self.total += 1;
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of requests recorded through [`record`](Self::record).
    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Fractional cache state in the box [0,1]^N.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAllocation {
    pub mass: Vec<f64>,
}

impl FractionalAllocation {
    pub fn new(mass: Vec<f64>) -> Self {
        Self { mass }
    }

    pub fn zeros(n: usize) -> Self {
        Self { mass: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn weighted_total(&self, sizes: &[f64]) -> f64 {
        self.mass.iter().zip(sizes).map(|(x, s)| x * s).sum()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.mass.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    /// Box and (weighted) capacity check with [`FEASIBILITY_TOL`] slack.
    pub fn is_feasible(&self, sizes: &[f64], capacity: f64) -> bool {
        self.mass
            .iter()
            .all(|&x| (-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&x))
            && self.weighted_total(sizes) <= capacity + FEASIBILITY_TOL
    }
}

/// The committed discrete cache configuration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntegralCacheSet {
    pub files: BTreeSet<usize>,
}

impl IntegralCacheSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, file: usize) -> bool {
        self.files.contains(&file)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn insert(&mut self, file: usize) -> bool {
        self.files.insert(file)
    }

    pub fn remove(&mut self, file: usize) -> bool {
        self.files.remove(&file)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.files.iter().copied()
    }

    pub fn total_size(&self, sizes: &[f64]) -> f64 {
        self.files.iter().map(|&i| sizes[i]).sum()
    }

    pub fn is_feasible(&self, sizes: &[f64], capacity: f64) -> bool {
        self.files.iter().all(|&i| i < sizes.len()) && self.total_size(sizes) <= capacity + FEASIBILITY_TOL
    }

    pub fn indicator(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &i in &self.files {
            v[i] = 1.0;
        }
        v
    }
}

impl FromIterator<usize> for IntegralCacheSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self {
            files: iter.into_iter().collect(),
        }
    }
}
