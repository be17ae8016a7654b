//! Randomized discretization of fractional cache states.
//!
//! [`madow_sample`] turns a point of the capped simplex into a cache set
//! with exact inclusion marginals. For unequal sizes, [`dantzig_relax`] and
//! [`depround`] produce vectors with at most one fractional coordinate, which
//! [`rand_half`] rounds with the ½ point-wise guarantee.

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::model::{FractionalAllocation, IntegralCacheSet, FEASIBILITY_TOL};

/// Distance to 0 or 1 below which a coordinate is treated as integral.
pub const INTEGRALITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoundingError {
    #[error("coordinate {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("fractional mass {total} exceeds capacity {capacity}")]
    OverCapacity { total: f64, capacity: f64 },
    #[error("size of item {index} is {size}, must be positive and finite")]
    NonPositiveSize { index: usize, size: f64 },
    #[error("expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector has {0} fractional coordinates, at most one allowed")]
    TooManyFractional(usize),
    #[error("profit of item {0} is not finite")]
    NonFiniteProfit(usize),
}

/// A vector in `[0,1]^N` with at most one coordinate strictly inside (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostIntegralVector {
    mass: Vec<f64>,
    fractional_index: Option<usize>,
}

impl AlmostIntegralVector {
    /// Validates the shape and snaps near-integral coordinates.
    pub fn new(mut mass: Vec<f64>) -> Result<Self, RoundingError> {
        let mut fractional = Vec::new();
        for (index, v) in mass.iter_mut().enumerate() {
            if !(-INTEGRALITY_TOL..=1.0 + INTEGRALITY_TOL).contains(v) {
                return Err(RoundingError::OutOfRange { index, value: *v });
            }
            if *v <= INTEGRALITY_TOL {
                *v = 0.0;
            } else if *v >= 1.0 - INTEGRALITY_TOL {
                *v = 1.0;
            } else {
                fractional.push(index);
            }
        }
        if fractional.len() > 1 {
            return Err(RoundingError::TooManyFractional(fractional.len()));
        }
        Ok(Self {
            mass,
            fractional_index: fractional.first().copied(),
        })
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn fractional_index(&self) -> Option<usize> {
        self.fractional_index
    }

    /// Coordinates equal to one.
    pub fn ones(&self) -> IntegralCacheSet {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(i, _)| i)
            .collect()
    }
}

fn check_unit_box(x: &[f64]) -> Result<(), RoundingError> {
    for (index, &value) in x.iter().enumerate() {
        if !(value.is_finite() && (-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&value)) {
            return Err(RoundingError::OutOfRange { index, value });
        }
    }
    Ok(())
}

/// Madow's systematic sampling: a random set of at most `capacity` files with
/// `Pr(i ∈ S) = x_i`. The set has exactly `capacity` files when `Σx = capacity`.
pub fn madow_sample<R: Rng + ?Sized>(
    x: &FractionalAllocation,
    capacity: usize,
    rng: &mut R,
) -> Result<IntegralCacheSet, RoundingError> {
    check_unit_box(&x.mass)?;
    let total: f64 = x.mass.iter().map(|v| v.clamp(0.0, 1.0)).sum();
    let cap = capacity as f64;
    if total > cap + FEASIBILITY_TOL {
        return Err(RoundingError::OverCapacity { total, capacity: cap });
    }
    // Absorb rounding error so a full allocation always yields `capacity` picks.
    let scale = if (total - cap).abs() <= FEASIBILITY_TOL && total > 0.0 {
        cap / total
    } else {
        1.0
    };

    let u: f64 = rng.random();
    let mut set = IntegralCacheSet::new();
    let mut file = 0;
    let mut upper = 0.0;
    let mut lower = 0.0;
    for i in 0..capacity {
        let point = u + i as f64;
        while file < x.len() && upper <= point {
            lower = upper;
            upper += x.mass[file].clamp(0.0, 1.0) * scale;
            file += 1;
        }
        if upper <= point {
            break;
        }
        if lower <= point {
            set.insert(file - 1);
        }
    }
    Ok(set)
}

/// Greedy solution of the fractional knapsack: items in decreasing
/// profit-to-size order (ties by index) are packed whole until the first one
/// that does not fit, which is packed fractionally. Returns the vector in
/// the original item order and that critical item, if any.
pub fn dantzig_relax(
    capacity: f64,
    profits: &[f64],
    sizes: &[f64],
) -> Result<(AlmostIntegralVector, Option<usize>), RoundingError> {
    if profits.len() != sizes.len() {
        return Err(RoundingError::DimensionMismatch {
            expected: sizes.len(),
            actual: profits.len(),
        });
    }
    if let Some(index) = sizes.iter().position(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(RoundingError::NonPositiveSize {
            index,
            size: sizes[index],
        });
    }
    if let Some(i) = profits.iter().position(|p| !p.is_finite()) {
        return Err(RoundingError::NonFiniteProfit(i));
    }

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (profits[a] / sizes[a], profits[b] / sizes[b]);
        rb.partial_cmp(&ra).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });

    let mut mass = vec![0.0; sizes.len()];
    let mut used = 0.0;
    let mut critical = None;
    for &i in &order {
        if used + sizes[i] > capacity {
            mass[i] = ((capacity - used) / sizes[i]).clamp(0.0, 1.0);
            critical = Some(i);
            break;
        }
        mass[i] = 1.0;
        used += sizes[i];
    }
    Ok((AlmostIntegralVector::new(mass)?, critical))
}

/// Randomized rounding with `E[y_i] ≥ ½ v_i`: with probability ½ keep the
/// coordinates equal to one, otherwise keep only the fractional coordinate.
/// Integral inputs are returned unchanged.
pub fn rand_half<R: Rng + ?Sized>(v: &AlmostIntegralVector, rng: &mut R) -> IntegralCacheSet {
    match v.fractional_index() {
        None => v.ones(),
        Some(k) => {
            if rng.random_bool(0.5) {
                v.ones()
            } else {
                std::iter::once(k).collect()
            }
        }
    }
}

/// Dependent rounding: resolves the two leftmost fractional coordinates at a
/// time by a two-outcome move along `s_i Δa_i + s_j Δa_j = 0`, chosen with
/// probabilities that keep every marginal unbiased. At least one coordinate
/// of the pair becomes integral per step.
pub fn depround<R: Rng + ?Sized>(a: &[f64], sizes: &[f64], rng: &mut R) -> Result<AlmostIntegralVector, RoundingError> {
    if a.len() != sizes.len() {
        return Err(RoundingError::DimensionMismatch {
            expected: sizes.len(),
            actual: a.len(),
        });
    }
    check_unit_box(a)?;
    if let Some(index) = sizes.iter().position(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(RoundingError::NonPositiveSize {
            index,
            size: sizes[index],
        });
    }

    let snap = |v: f64| {
        if v <= INTEGRALITY_TOL {
            0.0
        } else if v >= 1.0 - INTEGRALITY_TOL {
            1.0
        } else {
            v
        }
    };
    let mut b: Vec<f64> = a.iter().map(|&v| snap(v)).collect();
    let is_fractional = |v: f64| v > 0.0 && v < 1.0;

    let mut cursor = 0;
    let mut pending: Option<usize> = None;
    while cursor < b.len() {
        if !is_fractional(b[cursor]) {
            cursor += 1;
            continue;
        }
        let Some(i) = pending else {
            pending = Some(cursor);
            cursor += 1;
            continue;
        };
        let j = cursor;
        let (si, sj) = (sizes[i], sizes[j]);
        // Weighted mass that can move from j to i, and from i to j.
        let up = (si * (1.0 - b[i])).min(sj * b[j]);
        let down = (si * b[i]).min(sj * (1.0 - b[j]));
        let weighted = si * b[i] + sj * b[j];
        if rng.random_bool(down / (up + down)) {
            if si * (1.0 - b[i]) <= sj * b[j] {
                b[i] = 1.0;
                b[j] = snap((weighted - si) / sj);
            } else {
                b[j] = 0.0;
                b[i] = snap(weighted / si);
            }
        } else if si * b[i] <= sj * (1.0 - b[j]) {
            b[i] = 0.0;
            b[j] = snap(weighted / sj);
        } else {
            b[j] = 1.0;
            b[i] = snap((weighted - sj) / si);
        }
        b[i] = b[i].clamp(0.0, 1.0);
        b[j] = b[j].clamp(0.0, 1.0);
        // The survivor (if any) stays the leftmost pending fractional.
        pending = if is_fractional(b[i]) {
            Some(i)
        } else if is_fractional(b[j]) {
            Some(j)
        } else {
            None
        };
        cursor += 1;
    }
    AlmostIntegralVector::new(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn madow_integral_input_is_deterministic() {
        let x = FractionalAllocation::new(vec![1.0, 1.0, 0.0, 0.0]);
        let mut r = rng(1);
        for _ in 0..100 {
            assert_eq!(madow_sample(&x, 2, &mut r).unwrap(), [0, 1].into_iter().collect());
        }
    }

    #[test]
    fn madow_two_halves() {
        // U < 0.5 selects file 0, U ≥ 0.5 selects file 1.
        let x = FractionalAllocation::new(vec![0.5, 0.5]);
        let mut r = rng(2);
        let mut zero = 0;
        for _ in 0..20_000 {
            let s = madow_sample(&x, 1, &mut r).unwrap();
            assert_eq!(s.len(), 1);
            zero += usize::from(s.contains(0));
        }
        assert!((zero as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn madow_partial_mass_may_return_fewer_files() {
        let x = FractionalAllocation::new(vec![0.2, 0.3, 0.0]);
        let mut r = rng(3);
        for _ in 0..1000 {
            assert!(madow_sample(&x, 2, &mut r).unwrap().len() <= 1);
        }
    }

    #[test]
    fn madow_rejects_invalid_input() {
        let mut r = rng(0);
        assert!(matches!(
            madow_sample(&FractionalAllocation::new(vec![0.9, 0.9]), 1, &mut r),
            Err(RoundingError::OverCapacity { .. })
        ));
        assert!(matches!(
            madow_sample(&FractionalAllocation::new(vec![1.5]), 2, &mut r),
            Err(RoundingError::OutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn dantzig_examples() {
        let (y, k) = dantzig_relax(5.0, &[6.0, 4.0, 3.0], &[2.0, 4.0, 3.0]).unwrap();
        assert_eq!(y.mass(), &[1.0, 0.75, 0.0]);
        assert_eq!(k, Some(1));
        assert_eq!(y.fractional_index(), Some(1));

        let (y, k) = dantzig_relax(10.0, &[1.0, 7.0], &[2.0, 3.0]).unwrap();
        assert_eq!(y.mass(), &[1.0, 1.0]);
        assert_eq!(k, None);

        let (y, k) = dantzig_relax(2.0, &[5.0], &[2.0]).unwrap();
        assert_eq!(y.mass(), &[1.0]);
        assert_eq!(k, None);

        assert!(dantzig_relax(2.0, &[5.0], &[0.0]).is_err());
    }

    #[test]
    fn rand_half_examples() {
        let v = AlmostIntegralVector::new(vec![1.0, 1.0, 0.5, 0.0]).unwrap();
        let mut r = rng(4);
        let mut ones = 0;
        for _ in 0..20_000 {
            let s = rand_half(&v, &mut r);
            if s == [0, 1].into_iter().collect() {
                ones += 1;
            } else {
                assert_eq!(s, [2].into_iter().collect());
            }
        }
        assert!((ones as f64 / 20_000.0 - 0.5).abs() < 0.02);

        let v = AlmostIntegralVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        for _ in 0..100 {
            assert_eq!(rand_half(&v, &mut r), [0].into_iter().collect());
        }

        let v = AlmostIntegralVector::new(vec![0.3]).unwrap();
        let hits: usize = (0..20_000).map(|_| rand_half(&v, &mut r).len()).sum();
        assert!((hits as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn almost_integral_rejects_two_fractions() {
        assert_eq!(
            AlmostIntegralVector::new(vec![0.5, 0.5]),
            Err(RoundingError::TooManyFractional(2))
        );
    }

    #[test]
    fn depround_pair_resolves_to_a_vertex() {
        let mut r = rng(5);
        let mut first = 0;
        for _ in 0..20_000 {
            let b = depround(&[0.5, 0.5], &[1.0, 1.0], &mut r).unwrap();
            assert!(b.mass() == [1.0, 0.0] || b.mass() == [0.0, 1.0]);
            first += usize::from(b.mass()[0] == 1.0);
        }
        assert!((first as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn depround_leaves_almost_integral_input() {
        let mut r = rng(6);
        let b = depround(&[1.0, 0.3, 0.0], &[2.0, 5.0, 1.0], &mut r).unwrap();
        assert_eq!(b.mass(), &[1.0, 0.3, 0.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn depround_preserves_weighted_sum(
                a in proptest::collection::vec(0.0f64..=1.0, 1..25),
                seed in any::<u64>(),
            ) {
                let sizes: Vec<f64> = (0..a.len()).map(|i| 1.0 + (i * 7 % 10) as f64).collect();
                let b = depround(&a, &sizes, &mut rng(seed)).unwrap();
                let before: f64 = a.iter().zip(&sizes).map(|(x, s)| x * s).sum();
                let after: f64 = b.mass().iter().zip(&sizes).map(|(x, s)| x * s).sum();
                prop_assert!((before - after).abs() <= 1e-9);
                prop_assert!(b.mass().iter().filter(|&&v| v > 0.0 && v < 1.0).count() <= 1);
            }

            #[test]
            fn dantzig_fills_min_capacity(
                p in proptest::collection::vec(-5.0f64..20.0, 1..20),
                cap in 10.0f64..60.0,
            ) {
                let sizes: Vec<f64> = (0..p.len()).map(|i| 1.0 + (i * 3 % 10) as f64).collect();
                let (y, _) = dantzig_relax(cap, &p, &sizes).unwrap();
                let load: f64 = y.mass().iter().zip(&sizes).map(|(x, s)| x * s).sum();
                let expected = cap.min(sizes.iter().sum());
                prop_assert!((load - expected).abs() <= 1e-9);
            }

            #[test]
            fn madow_cardinality(
                w in proptest::collection::vec(0.0f64..1.0, 2..30),
                cap in 1usize..6,
                seed in any::<u64>(),
            ) {
                let x = crate::projections::project_capped_simplex(&w.iter().map(|v| v * 3.0).collect::<Vec<_>>(), cap as f64).unwrap();
                let s = madow_sample(&x, cap, &mut rng(seed)).unwrap();
                prop_assert!(s.len() <= cap);
                let total = x.total();
                if (total - total.round()).abs() < 1e-9 {
                    prop_assert_eq!(s.len() as f64, total.round());
                }
            }
        }
    }
}
