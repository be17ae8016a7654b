//! Offline best-in-hindsight benchmarks and α-regret accounting.

use thiserror::Error;

use crate::model::{IntegralCacheSet, RequestEvent};
use crate::policies::top_c;
use crate::projections::BipartitePolytopeSpec;

/// Approximation factor of the equal-size policies.
pub const ALPHA_EQUAL: f64 = 1.0;
/// Approximation factor of the unequal-size (knapsack) policies.
pub const ALPHA_KNAPSACK: f64 = 0.5;
/// Approximation factor of the bipartite policy, `1 − 1/e`.
pub const ALPHA_BIPARTITE: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// Largest number of configurations the bipartite enumeration will visit.
pub const MAX_ENUMERATION: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("size of file {file} is {size}; the knapsack benchmark needs integer sizes")]
    NonIntegerSize { file: usize, size: f64 },
    #[error("capacity {0} is not a nonnegative integer")]
    NonIntegerCapacity(f64),
    #[error("bipartite instance has {0:.0} cache configurations, more than the enumeration limit")]
    TooLarge(f64),
    #[error("expected {expected} counts, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("request {slot} lacks a user id in bipartite mode")]
    MissingUser { slot: u64 },
}

/// The `C` most requested files, ties by index, and their total count.
pub fn best_in_hindsight_top_c(counts: &[f64], capacity: usize) -> (f64, IntegralCacheSet) {
    let set: IntegralCacheSet = top_c(counts, capacity).into_iter().collect();
    let value = set.iter().map(|i| counts[i]).sum();
    (value, set)
}

fn as_integer(v: f64) -> Option<usize> {
    (v >= 0.0 && v.fract() == 0.0 && v.is_finite()).then_some(v as usize)
}

/// Exact 0/1 knapsack by dynamic programming over capacities `0..=C`.
/// Zero-count files are never cached; among optimal sets the
/// lexicographically smallest (as an ascending index sequence) is returned.
pub fn knapsack_dp_opt(
    counts: &[f64],
    sizes: &[f64],
    capacity: f64,
) -> Result<(f64, IntegralCacheSet), BenchmarkError> {
    if counts.len() != sizes.len() {
        return Err(BenchmarkError::DimensionMismatch {
            expected: sizes.len(),
            actual: counts.len(),
        });
    }
    let cap = as_integer(capacity).ok_or(BenchmarkError::NonIntegerCapacity(capacity))?;
    let mut int_sizes = Vec::with_capacity(sizes.len());
    for (file, &size) in sizes.iter().enumerate() {
        int_sizes.push(
            as_integer(size)
                .filter(|&s| s > 0)
                .ok_or(BenchmarkError::NonIntegerSize { file, size })?,
        );
    }
    let n = counts.len();
    // best[i][c]: optimum over files i.. with budget c
    let width = cap + 1;
    let mut best = vec![0.0; (n + 1) * width];
    for i in (0..n).rev() {
        for c in 0..width {
            let skip = best[(i + 1) * width + c];
            let take = if counts[i] > 0.0 && int_sizes[i] <= c {
                counts[i] + best[(i + 1) * width + c - int_sizes[i]]
            } else {
                f64::NEG_INFINITY
            };
            best[i * width + c] = skip.max(take);
        }
    }
    let mut set = IntegralCacheSet::new();
    let mut c = cap;
    for i in 0..n {
        if counts[i] > 0.0
            && int_sizes[i] <= c
            && counts[i] + best[(i + 1) * width + c - int_sizes[i]] == best[i * width + c]
        {
            set.insert(i);
            c -= int_sizes[i];
        }
    }
    Ok((best[cap], set))
}

/// Number of configurations [`bipartite_exhaustive_opt`] enumerates.
pub fn bipartite_configurations(spec: &BipartitePolytopeSpec) -> f64 {
    let n = spec.n_files();
    spec.capacities()
        .iter()
        .map(|&c| {
            let k = c.min(n);
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
        })
        .product()
}

struct Enumeration<'a> {
    spec: &'a BipartitePolytopeSpec,
    counts: &'a [f64],
    cover: Vec<u32>,
    current: Vec<IntegralCacheSet>,
    value: f64,
    best: (f64, Vec<IntegralCacheSet>),
}

impl Enumeration<'_> {
    fn item(&self, file: usize, user: usize) -> usize {
        file * self.spec.n_users() + user
    }

    fn toggle(&mut self, cache: usize, file: usize, add: bool) {
        let users: Vec<usize> = self
            .spec
            .cache_edge_ids(cache)
            .iter()
            .map(|&e| self.spec.edges()[e].0)
            .collect();
        for i in users {
            let k = self.item(file, i);
            if add {
                if self.cover[k] == 0 {
                    self.value += self.counts[k];
                }
                self.cover[k] += 1;
            } else {
                self.cover[k] -= 1;
                if self.cover[k] == 0 {
                    self.value -= self.counts[k];
                }
            }
        }
    }

    fn cache(&mut self, j: usize) {
        if j == self.spec.n_caches() {
            if self.value > self.best.0 {
                self.best = (self.value, self.current.clone());
            }
            return;
        }
        let k = self.spec.capacities()[j].min(self.spec.n_files());
        self.subset(j, 0, k);
    }

    fn subset(&mut self, j: usize, from: usize, remaining: usize) {
        if remaining == 0 {
            self.cache(j + 1);
            return;
        }
        for n in from..=self.spec.n_files() - remaining {
            self.current[j].insert(n);
            self.toggle(j, n, true);
            self.subset(j, n + 1, remaining - 1);
            self.toggle(j, n, false);
            self.current[j].remove(n);
        }
    }
}

/// Exact best static configuration of a bipartite network by enumerating
/// every full cache assignment. `counts` is indexed by `file · n_users + user`.
pub fn bipartite_exhaustive_opt(
    counts: &[f64],
    spec: &BipartitePolytopeSpec,
) -> Result<(f64, Vec<IntegralCacheSet>), BenchmarkError> {
    let expected = spec.n_files() * spec.n_users();
    if counts.len() != expected {
        return Err(BenchmarkError::DimensionMismatch {
            expected,
            actual: counts.len(),
        });
    }
    let configs = bipartite_configurations(spec);
    if configs > MAX_ENUMERATION {
        return Err(BenchmarkError::TooLarge(configs));
    }
    let mut e = Enumeration {
        spec,
        counts,
        cover: vec![0; expected],
        current: vec![IntegralCacheSet::new(); spec.n_caches()],
        value: 0.0,
        best: (f64::NEG_INFINITY, Vec::new()),
    };
    e.cache(0);
    Ok(e.best)
}

/// Action-space family the benchmark optimizes over.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkMode {
    EqualSize { n_files: usize, capacity: usize },
    Knapsack { sizes: Vec<f64>, capacity: f64 },
    Bipartite(BipartitePolytopeSpec),
}

/// A fixed hindsight-optimal configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum StaticBenchmark {
    Single(IntegralCacheSet),
    Bipartite(Vec<IntegralCacheSet>),
}

impl BenchmarkMode {
    pub fn n_items(&self) -> usize {
        match self {
            BenchmarkMode::EqualSize { n_files, .. } => *n_files,
            BenchmarkMode::Knapsack { sizes, .. } => sizes.len(),
            BenchmarkMode::Bipartite(spec) => spec.n_files() * spec.n_users(),
        }
    }

    fn item(&self, request: &RequestEvent) -> Result<usize, BenchmarkError> {
        match self {
            BenchmarkMode::Bipartite(spec) => {
                let user = request.user.ok_or(BenchmarkError::MissingUser { slot: request.slot })?;
                Ok(request.file * spec.n_users() + user)
            }
            _ => Ok(request.file),
        }
    }

    pub fn counts(&self, requests: &[RequestEvent]) -> Result<Vec<f64>, BenchmarkError> {
        let mut counts = vec![0.0; self.n_items()];
        for r in requests {
            counts[self.item(r)?] += 1.0;
        }
        Ok(counts)
    }

    /// Optimal value and configuration for the given counts.
    pub fn solve(&self, counts: &[f64]) -> Result<(f64, StaticBenchmark), BenchmarkError> {
        Ok(match self {
            BenchmarkMode::EqualSize { capacity, .. } => {
                let (v, s) = best_in_hindsight_top_c(counts, *capacity);
                (v, StaticBenchmark::Single(s))
            }
            BenchmarkMode::Knapsack { sizes, capacity } => {
                let (v, s) = knapsack_dp_opt(counts, sizes, *capacity)?;
                (v, StaticBenchmark::Single(s))
            }
            BenchmarkMode::Bipartite(spec) => {
                let (v, s) = bipartite_exhaustive_opt(counts, spec)?;
                (v, StaticBenchmark::Bipartite(s))
            }
        })
    }

    /// Hit indicator of a fixed configuration for one request.
    pub fn hit(&self, action: &StaticBenchmark, request: &RequestEvent) -> f64 {
        let served = match (self, action) {
            (BenchmarkMode::Bipartite(spec), StaticBenchmark::Bipartite(sets)) => request
                .user
                .is_some_and(|i| i < spec.n_users() && spec.user_caches(i).any(|j| sets[j].contains(request.file))),
            (_, StaticBenchmark::Single(set)) => set.contains(request.file),
            _ => false,
        };
        if served {
            1.0
        } else {
            0.0
        }
    }

    /// Full-horizon optimum with its per-slot utility contributions.
    pub fn static_contributions(&self, requests: &[RequestEvent]) -> Result<(f64, Vec<f64>), BenchmarkError> {
        let (value, action) = self.solve(&self.counts(requests)?)?;
        Ok((value, requests.iter().map(|r| self.hit(&action, r)).collect()))
    }

    /// Optimum recomputed on every prefix of the trace. This is a different
    /// curve from the static benchmark and costs one solve per slot.
    pub fn prefix_values(&self, requests: &[RequestEvent]) -> Result<Vec<f64>, BenchmarkError> {
        let mut counts = vec![0.0; self.n_items()];
        let mut out = Vec::with_capacity(requests.len());
        for r in requests {
            counts[self.item(r)?] += 1.0;
            out.push(self.solve(&counts)?.0);
        }
        Ok(out)
    }
}

/// Cumulative α-regret of a run against a static benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSeries {
    pub alpha: f64,
    pub hits: Vec<f64>,
    pub benchmark_hits: Vec<f64>,
    pub cum_hits: Vec<f64>,
    pub cum_opt: Vec<f64>,
    /// `α·cum_opt − cum_hits` per slot.
    pub regret: Vec<f64>,
}

impl RegretSeries {
    pub fn final_regret(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }

    pub fn horizon(&self) -> usize {
        self.hits.len()
    }
}

/// Accumulates per-slot policy hits and benchmark contributions.
pub fn regret_accounting(hits: &[f64], benchmark_hits: &[f64], alpha: f64) -> RegretSeries {
    assert_eq!(hits.len(), benchmark_hits.len(), "one benchmark contribution per slot");
    let mut cum_hits = Vec::with_capacity(hits.len());
    let mut cum_opt = Vec::with_capacity(hits.len());
    let mut regret = Vec::with_capacity(hits.len());
    let (mut h, mut o) = (0.0, 0.0);
    for (&x, &b) in hits.iter().zip(benchmark_hits) {
        h += x;
        o += b;
        cum_hits.push(h);
        cum_opt.push(o);
        regret.push(alpha * o - h);
    }
    RegretSeries {
        alpha,
        hits: hits.to_vec(),
        benchmark_hits: benchmark_hits.to_vec(),
        cum_hits,
        cum_opt,
        regret,
    }
}
