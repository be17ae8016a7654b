//! Worked examples checked against independent brute-force oracles.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{active_set_projection, all_subsets, bipartite_polytope, knapsack_polytope, max_abs_diff};
use optcache::benchmark::{best_in_hindsight_top_c, bipartite_exhaustive_opt, knapsack_dp_opt};
use optcache::model::{FractionalAllocation, LibraryConfig, PredictionVector, RequestEvent};
use optcache::policies::{CachePolicy, OftrlUneqCache};
use optcache::projections::{
    dykstra_project_bipartite, project_capped_simplex, project_two_simplex, project_weighted_capped_simplex,
    BipartitePoint, BipartitePolytopeSpec, DYKSTRA_MAX_ITERS, DYKSTRA_TOL,
};
use optcache::rounding::madow_sample;
use optcache::traces::{TraceKind, TraceSpec};

#[test]
fn capped_simplex_interior_shift() {
    let z = [0.9, 0.8, 0.7];
    let reference = active_set_projection(&z, &knapsack_polytope(&[1.0; 3], 2.0));
    let x = project_capped_simplex(&z, 2.0).unwrap();
    assert!(max_abs_diff(&x.mass, &reference) < 1e-9);
    let lambda = (2.4 - 2.0) / 3.0;
    assert!(max_abs_diff(&x.mass, &[0.9 - lambda, 0.8 - lambda, 0.7 - lambda]) < 1e-12);
}

#[test]
fn weighted_projection_example() {
    let (z, s) = ([1.0, 1.0], [1.0, 2.0]);
    let x = project_weighted_capped_simplex(&z, &s, 2.0).unwrap();
    let reference = active_set_projection(&z, &knapsack_polytope(&s, 2.0));
    assert!(max_abs_diff(&x.mass, &reference) < 1e-9);
    assert!(max_abs_diff(&x.mass, &[0.8, 0.6]) < 1e-9);
    assert!((x.weighted_total(&s) - 2.0).abs() < 1e-9);
}

#[test]
fn two_simplex_matches_segment_grid() {
    let w = (0.7, 0.1);
    let (a, b) = project_two_simplex(w);
    let grid = (0..=100_000)
        .map(|k| k as f64 / 100_000.0)
        .min_by(|p, q| {
            let d = |p: f64| (p - w.0).powi(2) + (1.0 - p - w.1).powi(2);
            d(*p).total_cmp(&d(*q))
        })
        .unwrap();
    assert!((a - grid).abs() < 1e-5 && (b - (1.0 - grid)).abs() < 1e-5);
    assert!((a - 0.8).abs() < 1e-12 && (b - 0.2).abs() < 1e-12);
}

#[test]
fn dykstra_matches_grid_minimizer() {
    // Two files, one cache of size 1, one user; coordinates (k0, k1, u0, u1).
    let spec = BipartitePolytopeSpec::new(2, vec![1], 1, [(0, 0)]).unwrap();
    let z = BipartitePoint {
        coords: vec![1.0; spec.dim()],
    };
    let out = dykstra_project_bipartite(&z, &spec, DYKSTRA_TOL, DYKSTRA_MAX_ITERS).unwrap();
    let p = &out.point;
    let (k0, k1) = (p.k(&spec, 0, 0), p.k(&spec, 1, 0));
    let (u0, u1) = (p.u(&spec, 0, 0), p.u(&spec, 1, 0));
    assert!(k0 + k1 <= 1.0 + 1e-9 && u0 <= k0 + 1e-9 && u1 <= k1 + 1e-9 && u0 <= 1.0 + 1e-9);

    let steps = 100;
    let mut best = (f64::INFINITY, [0.0; 4]);
    for a in 0..=steps {
        for b in 0..=steps - a {
            let (ka, kb) = (a as f64 / steps as f64, b as f64 / steps as f64);
            // For fixed k the best u is min(z_u, k) = k coordinate-wise.
            let d = 2.0 * (1.0 - ka).powi(2) + 2.0 * (1.0 - kb).powi(2);
            if d < best.0 {
                best = (d, [ka, kb, ka, kb]);
            }
        }
    }
    let ours = [k0, k1, u0, u1];
    let order = [
        spec.k_index(0, 0),
        spec.k_index(1, 0),
        spec.u_index(0, 0),
        spec.u_index(1, 0),
    ];
    let exact = active_set_projection(&z.coords, &bipartite_polytope(&spec));
    let exact: Vec<f64> = order.iter().map(|&i| exact[i]).collect();
    assert!(
        max_abs_diff(&ours, &best.1) <= 1e-2 + 1e-9,
        "{ours:?} vs grid {:?}",
        best.1
    );
    assert!(max_abs_diff(&ours, &exact) <= 1e-3, "{ours:?} vs {exact:?}");
    assert!(max_abs_diff(&exact, &[0.5; 4]) < 1e-9);
}

#[test]
fn madow_two_halves_by_offset_ranges() {
    // Offsets in [0, 0.5) pick file 0, offsets in [0.5, 1) pick file 1.
    let x = FractionalAllocation::new(vec![0.5, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 100_000;
    let mut zero = 0;
    for _ in 0..draws {
        let s = madow_sample(&x, 1, &mut rng).unwrap();
        assert_eq!(s.len(), 1);
        zero += usize::from(s.contains(0));
    }
    assert!((zero as f64 / draws as f64 - 0.5).abs() < 0.01);
}

#[test]
fn zipf_sampler_passes_chi_square() {
    let draws = 100_000;
    let requests = TraceSpec::new(TraceKind::Zipf(1.0), 3, draws)
        .generate(&mut ChaCha8Rng::seed_from_u64(11))
        .unwrap();
    let mut observed = [0.0; 3];
    for r in &requests {
        observed[r.file] += 1.0;
    }
    let expected = [6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0].map(|p| p * draws as f64);
    let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    // 99.9% quantile of χ² with two degrees of freedom.
    assert!(chi2 < 13.82, "chi2 = {chi2}");
}

#[test]
fn knapsack_dp_matches_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let n = rng.random_range(1..=10);
        let counts: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0u32..20))).collect();
        let sizes: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(1u32..=6))).collect();
        let cap = f64::from(rng.random_range(1u32..=20));
        let brute = all_subsets(n)
            .filter(|s| s.iter().map(|&i| sizes[i]).sum::<f64>() <= cap)
            .map(|s| s.iter().map(|&i| counts[i]).sum::<f64>())
            .fold(0.0, f64::max);
        let (value, set) = knapsack_dp_opt(&counts, &sizes, cap).unwrap();
        assert_eq!(value, brute);
        assert!(set.is_feasible(&sizes, cap));
        assert_eq!(set.iter().map(|i| counts[i]).sum::<f64>(), value);
    }
}

#[test]
fn knapsack_example_value_and_set() {
    let (value, set) = knapsack_dp_opt(&[6.0, 10.0, 12.0], &[1.0, 2.0, 3.0], 5.0).unwrap();
    let brute = all_subsets(3)
        .filter(|s| s.iter().map(|&i| [1.0, 2.0, 3.0][i]).sum::<f64>() <= 5.0)
        .max_by(|a, b| {
            let v = |s: &Vec<usize>| s.iter().map(|&i| [6.0, 10.0, 12.0][i]).sum::<f64>();
            v(a).total_cmp(&v(b))
        })
        .unwrap();
    assert_eq!(value, 22.0);
    assert_eq!(set.iter().collect::<Vec<_>>(), brute);
    assert_eq!(brute, vec![1, 2]);
}

#[test]
fn top_c_matches_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let c = rng.random_range(1..=n);
        let counts: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0u32..9))).collect();
        let brute = all_subsets(n)
            .filter(|s| s.len() <= c)
            .map(|s| s.iter().map(|&i| counts[i]).sum::<f64>())
            .fold(0.0, f64::max);
        let (value, set) = best_in_hindsight_top_c(&counts, c);
        assert_eq!(value, brute);
        assert_eq!(set.len(), c);
    }
}

#[test]
fn bipartite_benchmark_caches_the_two_popular_files() {
    let spec = BipartitePolytopeSpec::new(4, vec![1, 1], 2, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
    // counts[file · 2 + user]; files 1 and 3 carry all requests.
    let mut counts = vec![0.0; 8];
    counts[2] = 5.0;
    counts[3] = 4.0;
    counts[6] = 3.0;
    counts[7] = 6.0;
    let mut brute = (f64::NEG_INFINITY, (0, 0));
    for a in 0..4 {
        for b in 0..4 {
            let held = |f: usize| f == a || f == b;
            let v: f64 = (0..4)
                .filter(|&f| held(f))
                .map(|f| counts[2 * f] + counts[2 * f + 1])
                .sum();
            if v > brute.0 {
                brute = (v, (a, b));
            }
        }
    }
    let (value, sets) = bipartite_exhaustive_opt(&counts, &spec).unwrap();
    assert_eq!(value, brute.0);
    assert_eq!(value, 18.0);
    let mut held: Vec<usize> = sets.iter().flat_map(|s| s.iter().collect::<Vec<_>>()).collect();
    held.sort_unstable();
    assert_eq!(held, vec![1, 3]);
}

#[test]
fn unequal_rounding_keeps_half_of_the_fractional_utility() {
    let sizes: Vec<f64> = [3.0, 1.0, 4.0, 2.0, 5.0, 2.0, 1.0, 3.0].to_vec();
    let library = LibraryConfig::with_sizes(7.0, sizes.clone()).unwrap();
    let mut policy = OftrlUneqCache::new(library, ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for t in 0..40 {
        let prediction = PredictionVector::one_hot(rng.random_range(0..8));
        policy.decide(&prediction).unwrap();
        policy.observe(&RequestEvent::new(t, rng.random_range(0..4))).unwrap();
    }
    let prediction = PredictionVector::one_hot(5);
    let iterate = policy.fractional_iterate(&prediction).unwrap();
    let draws = 10_000;
    let mut freq = [0.0; 8];
    for _ in 0..draws {
        let set = policy.round(&iterate).unwrap();
        assert!(set.is_feasible(&sizes, 7.0));
        for i in set.iter() {
            freq[i] += 1.0 / draws as f64;
        }
    }
    // Point-wise E[x] ≥ ½ x̂ implies E⟨θ, x⟩ ≥ ½⟨θ, x̂⟩ for every one-hot θ.
    for (f, x) in freq.iter().zip(&iterate.mass) {
        assert!(*f >= 0.5 * x - 0.01, "{freq:?} vs {:?}", iterate.mass);
    }
}
