//! Reference oracles shared by the integration tests.
#![allow(dead_code)]

use optcache::projections::BipartitePolytopeSpec;

/// Half-space `a·x ≤ b`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub a: Vec<f64>,
    pub b: f64,
}

pub fn box_constraints(dim: usize) -> Vec<Constraint> {
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        let mut up = vec![0.0; dim];
        up[i] = 1.0;
        let mut down = vec![0.0; dim];
        down[i] = -1.0;
        out.push(Constraint { a: up, b: 1.0 });
        out.push(Constraint { a: down, b: 0.0 });
    }
    out
}

/// `{x ∈ [0,1]^N : Σ s_i x_i ≤ C}`.
pub fn knapsack_polytope(sizes: &[f64], capacity: f64) -> Vec<Constraint> {
    let mut out = box_constraints(sizes.len());
    out.push(Constraint {
        a: sizes.to_vec(),
        b: capacity,
    });
    out
}

/// The relaxed caching/routing polytope, written out constraint by constraint
/// from the topology.
pub fn bipartite_polytope(spec: &BipartitePolytopeSpec) -> Vec<Constraint> {
    let dim = spec.dim();
    let mut out = box_constraints(dim);
    for (j, &cap) in spec.capacities().iter().enumerate() {
        let mut a = vec![0.0; dim];
        for n in 0..spec.n_files() {
            a[spec.k_index(n, j)] = 1.0;
        }
        out.push(Constraint { a, b: cap as f64 });
    }
    for n in 0..spec.n_files() {
        for i in 0..spec.n_users() {
            let mut a = vec![0.0; dim];
            for e in spec.user_edge_ids(i) {
                a[spec.u_index(n, e)] = 1.0;
            }
            out.push(Constraint { a, b: 1.0 });
        }
        for (e, &(_, j)) in spec.edges().iter().enumerate() {
            let mut a = vec![0.0; dim];
            a[spec.u_index(n, e)] = 1.0;
            a[spec.k_index(n, j)] = -1.0;
            out.push(Constraint { a, b: 0.0 });
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `m y = r` in place by Gaussian elimination with partial pivoting.
/// Returns `None` when `m` is (numerically) singular.
fn solve(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let k = r.len();
    for col in 0..k {
        let pivot = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, pivot);
        r.swap(col, pivot);
        for row in col + 1..k {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col].clone();
            for (dst, src) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            r[row] -= f * r[col];
        }
    }
    let mut y = vec![0.0; k];
    for row in (0..k).rev() {
        let tail: f64 = (row + 1..k).map(|c| m[row][c] * y[c]).sum();
        y[row] = (r[row] - tail) / m[row][row];
    }
    Some(y)
}

/// Exact Euclidean projection of `z` onto `{x : a_k·x ≤ b_k}` by enumerating
/// candidate active sets. The minimizer is the projection onto the affine
/// hull of the face it lies on, and that hull is cut out by some linearly
/// independent subset of the constraints, so the closest feasible candidate
/// over all such subsets is the answer. Exponential; meant for dim ≤ 6.
pub fn active_set_projection(z: &[f64], constraints: &[Constraint]) -> Vec<f64> {
    let dim = z.len();
    let feasible = |x: &[f64]| constraints.iter().all(|c| dot(&c.a, x) <= c.b + 1e-9);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut chosen = Vec::new();
    let mut consider = |subset: &[usize]| {
        let rows: Vec<&Constraint> = subset.iter().map(|&k| &constraints[k]).collect();
        let gram: Vec<Vec<f64>> = rows
            .iter()
            .map(|p| rows.iter().map(|q| dot(&p.a, &q.a)).collect())
            .collect();
        let rhs: Vec<f64> = rows.iter().map(|p| dot(&p.a, z) - p.b).collect();
        let Some(mu) = solve(gram, rhs) else { return };
        let mut x = z.to_vec();
        for (p, m) in rows.iter().zip(&mu) {
            for (xi, ai) in x.iter_mut().zip(&p.a) {
                *xi -= m * ai;
            }
        }
        if feasible(&x) {
            let d: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
    };
    enumerate_subsets(constraints.len(), dim, &mut chosen, 0, &mut consider);
    best.expect("polytope is non-empty").1
}

fn enumerate_subsets(n: usize, max_len: usize, chosen: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    f(chosen);
    if chosen.len() == max_len {
        return;
    }
    for k in start..n {
        chosen.push(k);
        enumerate_subsets(n, max_len, chosen, k + 1, f);
        chosen.pop();
    }
}

/// All subsets of `0..n`, as bitmasks.
pub fn all_subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u64..1 << n).map(move |mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean.
pub fn stderr(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
    (var / xs.len() as f64).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
