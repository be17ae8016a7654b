use super::simplex::project_capped_simplex;
use super::{check_finite, ProjectionError};

pub const DYKSTRA_TOL: f64 = 1e-6;
pub const DYKSTRA_MAX_ITERS: usize = 5000;

/// Bipartite cache network: `n_caches` caches with integral capacities,
/// `n_users` user locations and the user→cache adjacency.
///
/// Routing variables exist only for connected `(user, cache)` pairs; they
/// are indexed by edge id, edges being sorted by `(user, cache)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartitePolytopeSpec {
    n_files: usize,
    capacities: Vec<usize>,
    n_users: usize,
    edges: Vec<(usize, usize)>,
    user_edges: Vec<std::ops::Range<usize>>,
    cache_edges: Vec<Vec<usize>>,
}

impl BipartitePolytopeSpec {
    pub fn new(
        n_files: usize,
        capacities: Vec<usize>,
        n_users: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ProjectionError> {
        let invalid = |msg: String| Err(ProjectionError::InvalidTopology(msg));
        if n_files == 0 {
            return invalid("library is empty".into());
        }
        if capacities.is_empty() {
            return invalid("no caches".into());
        }
        if let Some(j) = capacities.iter().position(|&c| c == 0) {
            return invalid(format!("cache {j} has zero capacity"));
        }
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        edges.sort_unstable();
        edges.dedup();
        for &(i, j) in &edges {
            if i >= n_users || j >= capacities.len() {
                return invalid(format!("edge ({i}, {j}) references an unknown user or cache"));
            }
        }
        let mut user_edges = Vec::with_capacity(n_users);
        let mut cache_edges = vec![Vec::new(); capacities.len()];
        let mut start = 0;
        for i in 0..n_users {
            let end = start + edges[start..].iter().take_while(|&&(u, _)| u == i).count();
            if end == start {
                return invalid(format!("user {i} is not connected to any cache"));
            }
            user_edges.push(start..end);
            start = end;
        }
        for (e, &(_, j)) in edges.iter().enumerate() {
            cache_edges[j].push(e);
        }
        Ok(Self {
            n_files,
            capacities,
            n_users,
            edges,
            user_edges,
            cache_edges,
        })
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn n_caches(&self) -> usize {
        self.capacities.len()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }

    pub fn total_capacity(&self) -> usize {
        self.capacities.iter().sum()
    }

    /// Connected `(user, cache)` pairs, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn connected(&self, user: usize, cache: usize) -> bool {
        self.edges[self.user_edges[user].clone()]
            .iter()
            .any(|&(_, j)| j == cache)
    }

    /// Edge ids of a user, in ascending cache order.
    pub fn user_edge_ids(&self, user: usize) -> std::ops::Range<usize> {
        self.user_edges[user].clone()
    }

    pub fn cache_edge_ids(&self, cache: usize) -> &[usize] {
        &self.cache_edges[cache]
    }

    /// Caches reachable from a user.
    pub fn user_caches(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[self.user_edges[user].clone()].iter().map(|&(_, j)| j)
    }

    /// Dimension of the flattened `(k, u)` vector.
    pub fn dim(&self) -> usize {
        self.n_files * (self.n_caches() + self.edges.len())
    }

    pub fn k_index(&self, file: usize, cache: usize) -> usize {
        file * self.n_caches() + cache
    }

    pub fn u_index(&self, file: usize, edge: usize) -> usize {
        self.n_files * self.n_caches() + file * self.edges.len() + edge
    }

    /// Largest violation of any constraint of the relaxed polytope.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for &v in x {
            worst = worst.max(-v).max(v - 1.0);
        }
        for (j, &cap) in self.capacities.iter().enumerate() {
            let load: f64 = (0..self.n_files).map(|n| x[self.k_index(n, j)]).sum();
            worst = worst.max(load - cap as f64);
        }
        for n in 0..self.n_files {
            for i in 0..self.n_users {
                let routed: f64 = self.user_edge_ids(i).map(|e| x[self.u_index(n, e)]).sum();
                worst = worst.max(routed - 1.0);
            }
            for (e, &(_, j)) in self.edges.iter().enumerate() {
                worst = worst.max(x[self.u_index(n, e)] - x[self.k_index(n, j)]);
            }
        }
        worst
    }

    /// Exact projection onto the box, per-cache capacity and per-(file,user)
    /// routing constraints (a product of capped simplices).
    fn project_capacity_sets(&self, x: &mut [f64], scratch: &mut Vec<f64>) {
        let nj = self.n_caches();
        for (j, &cap) in self.capacities.iter().enumerate() {
            scratch.clear();
            scratch.extend((0..self.n_files).map(|n| x[n * nj + j]));
            let p = project_capped_simplex(scratch, cap as f64).expect("finite iterate");
            for (n, v) in p.mass.into_iter().enumerate() {
                x[n * nj + j] = v;
            }
        }
        for n in 0..self.n_files {
            for i in 0..self.n_users {
                let ids = self.user_edge_ids(i);
                scratch.clear();
                scratch.extend(ids.clone().map(|e| x[self.u_index(n, e)]));
                let p = project_capped_simplex(scratch, 1.0).expect("finite iterate");
                for (e, v) in ids.zip(p.mass) {
                    x[self.u_index(n, e)] = v;
                }
            }
        }
    }

    /// Exact projection onto `{u_e ≤ k_nj for every edge e into cache j}`;
    /// separable over `(file, cache)` groups.
    fn project_coupling_sets(&self, x: &mut [f64], scratch: &mut Vec<f64>) {
        for n in 0..self.n_files {
            for j in 0..self.n_caches() {
                let ids = &self.cache_edges[j];
                if ids.is_empty() {
                    continue;
                }
                let ki = self.k_index(n, j);
                let k = x[ki];
                if ids.iter().all(|&e| x[self.u_index(n, e)] <= k) {
                    continue;
                }
                scratch.clear();
                scratch.extend(ids.iter().map(|&e| x[self.u_index(n, e)]));
                scratch.sort_by(|a, b| b.total_cmp(a));
                // smallest m with u_(m+1) ≤ t, t = (k + Σ_{top m} u) / (1 + m)
                let mut acc = k;
                let mut level = k;
                for m in 0..scratch.len() {
                    acc += scratch[m];
                    level = acc / (m as f64 + 2.0);
                    if m + 1 == scratch.len() || scratch[m + 1] <= level {
                        break;
                    }
                }
                x[ki] = level;
                for &e in ids {
                    let ui = self.u_index(n, e);
                    x[ui] = x[ui].min(level);
                }
            }
        }
    }

    /// Makes a nearly-feasible point exactly feasible: box clip, exact
    /// capacity projection of every cache column, `u ≤ k`, then per
    /// (file,user) rescaling of routing mass.
    fn repair(&self, x: &mut [f64], scratch: &mut Vec<f64>) {
        for v in x.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        let nj = self.n_caches();
        for (j, &cap) in self.capacities.iter().enumerate() {
            scratch.clear();
            scratch.extend((0..self.n_files).map(|n| x[n * nj + j]));
            let p = project_capped_simplex(scratch, cap as f64).expect("finite iterate");
            for (n, v) in p.mass.into_iter().enumerate() {
                x[n * nj + j] = v;
            }
        }
        for n in 0..self.n_files {
            for (e, &(_, j)) in self.edges.iter().enumerate() {
                let ui = self.u_index(n, e);
                x[ui] = x[ui].min(x[self.k_index(n, j)]);
            }
            for i in 0..self.n_users {
                let routed: f64 = self.user_edge_ids(i).map(|e| x[self.u_index(n, e)]).sum();
                if routed > 1.0 {
                    for e in self.user_edge_ids(i) {
                        x[self.u_index(n, e)] /= routed;
                    }
                }
            }
        }
    }
}

/// A point of the lifted `(k, u)` space, flattened as documented on
/// [`BipartitePolytopeSpec::k_index`] / [`BipartitePolytopeSpec::u_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct BipartitePoint {
    pub coords: Vec<f64>,
}

impl BipartitePoint {
    pub fn zeros(spec: &BipartitePolytopeSpec) -> Self {
        Self {
            coords: vec![0.0; spec.dim()],
        }
    }

    pub fn k(&self, spec: &BipartitePolytopeSpec, file: usize, cache: usize) -> f64 {
        self.coords[spec.k_index(file, cache)]
    }

    pub fn u(&self, spec: &BipartitePolytopeSpec, file: usize, edge: usize) -> f64 {
        self.coords[spec.u_index(file, edge)]
    }

    /// Fractional occupancy of one cache, indexed by file.
    pub fn cache_column(&self, spec: &BipartitePolytopeSpec, cache: usize) -> Vec<f64> {
        (0..spec.n_files()).map(|n| self.k(spec, n, cache)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DykstraOutcome {
    pub point: BipartitePoint,
    pub iterations: usize,
    /// Constraint violation of the last iterate, before the final repair.
    pub residual: f64,
}

/// Euclidean projection onto the LP relaxation of the caching/routing
/// polytope by Dykstra's alternating projections between two exactly
/// projectable families: the capacity/routing simplices and the coupling
/// cones `u ≤ k`. Each family keeps its own correction term.
pub fn dykstra_project_bipartite(
    z: &BipartitePoint,
    spec: &BipartitePolytopeSpec,
    tol: f64,
    max_iters: usize,
) -> Result<DykstraOutcome, ProjectionError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(ProjectionError::InvalidTolerance(tol));
    }
    if z.coords.len() != spec.dim() {
        return Err(ProjectionError::DimensionMismatch {
            expected: spec.dim(),
            actual: z.coords.len(),
        });
    }
    check_finite(&z.coords)?;

    let dim = spec.dim();
    let mut scratch = Vec::new();
    let mut x = z.coords.clone();
    let mut p = vec![0.0; dim];
    let mut q = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        iterations += 1;
        for k in 0..dim {
            y[k] = x[k] + p[k];
        }
        spec.project_capacity_sets(&mut y, &mut scratch);
        for k in 0..dim {
            p[k] += x[k] - y[k];
            next[k] = y[k] + q[k];
        }
        spec.project_coupling_sets(&mut next, &mut scratch);
        // Stop once the iterate is stationary and both families agree on it;
        // stationarity alone can occur while the corrections are still growing.
        let mut moved: f64 = 0.0;
        let mut gap: f64 = 0.0;
        for k in 0..dim {
            q[k] += y[k] - next[k];
            moved = moved.max((next[k] - x[k]).abs());
            gap = gap.max((next[k] - y[k]).abs());
        }
        std::mem::swap(&mut x, &mut next);
        if moved < tol && gap < tol {
            converged = true;
            break;
        }
    }

    let residual = spec.max_violation(&x);
    if !converged && residual > tol {
        return Err(ProjectionError::NotConverged { iterations, residual });
    }
    spec.repair(&mut x, &mut scratch);
    Ok(DykstraOutcome {
        point: BipartitePoint { coords: x },
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pair(n: usize, cap: usize) -> BipartitePolytopeSpec {
        BipartitePolytopeSpec::new(n, vec![cap], 1, [(0, 0)]).unwrap()
    }

    #[test]
    fn topology_validation() {
        assert!(BipartitePolytopeSpec::new(3, vec![1], 2, [(0, 0)]).is_err());
        assert!(BipartitePolytopeSpec::new(3, vec![0], 1, [(0, 0)]).is_err());
        assert!(BipartitePolytopeSpec::new(3, vec![1], 1, [(0, 1)]).is_err());
        let spec = BipartitePolytopeSpec::new(3, vec![1, 2], 2, [(1, 1), (0, 0), (0, 1)]).unwrap();
        assert_eq!(spec.edges(), &[(0, 0), (0, 1), (1, 1)]);
        assert_eq!(spec.cache_edge_ids(1), &[1, 2]);
        assert!(spec.connected(1, 1) && !spec.connected(1, 0));
        assert_eq!(spec.dim(), 3 * (2 + 3));
    }

    #[test]
    fn feasible_point_is_fixed() {
        let spec = BipartitePolytopeSpec::new(3, vec![2, 1], 2, [(0, 0), (0, 1), (1, 1)]).unwrap();
        let mut z = BipartitePoint::zeros(&spec);
        for n in 0..3 {
            z.coords[spec.k_index(n, 0)] = 0.5;
            z.coords[spec.k_index(n, 1)] = 0.3;
            for e in 0..3 {
                z.coords[spec.u_index(n, e)] = 0.2;
            }
        }
        let out = dykstra_project_bipartite(&z, &spec, DYKSTRA_TOL, DYKSTRA_MAX_ITERS).unwrap();
        for (a, b) in out.point.coords.iter().zip(&z.coords) {
            assert!((a - b).abs() <= DYKSTRA_TOL);
        }
    }

    #[test]
    fn zero_routing_reduces_to_capped_simplex() {
        let spec = single_pair(5, 2);
        let mut z = BipartitePoint::zeros(&spec);
        let k = [0.9, 1.4, 0.2, 0.7, -0.3];
        for (n, &v) in k.iter().enumerate() {
            z.coords[spec.k_index(n, 0)] = v;
        }
        let out = dykstra_project_bipartite(&z, &spec, DYKSTRA_TOL, DYKSTRA_MAX_ITERS).unwrap();
        let reference = project_capped_simplex(&k, 2.0).unwrap();
        for n in 0..5 {
            assert!((out.point.k(&spec, n, 0) - reference.mass[n]).abs() <= 1e-5);
            assert!(out.point.u(&spec, n, 0).abs() <= 1e-9);
        }
    }

    #[test]
    fn coupling_cone_projection_is_exact() {
        let spec = BipartitePolytopeSpec::new(1, vec![1], 3, [(0, 0), (1, 0), (2, 0)]).unwrap();
        let mut x = vec![0.0; spec.dim()];
        // k = 0.1, u = (0.9, 0.5, 0.05): clamp the top two at t = (0.1+0.9+0.5)/3 = 0.5
        x[spec.k_index(0, 0)] = 0.1;
        x[spec.u_index(0, 0)] = 0.9;
        x[spec.u_index(0, 1)] = 0.5;
        x[spec.u_index(0, 2)] = 0.05;
        spec.project_coupling_sets(&mut x, &mut Vec::new());
        assert!((x[spec.k_index(0, 0)] - 0.5).abs() < 1e-12);
        assert!((x[spec.u_index(0, 0)] - 0.5).abs() < 1e-12);
        assert!((x[spec.u_index(0, 1)] - 0.5).abs() < 1e-12);
        assert_eq!(x[spec.u_index(0, 2)], 0.05);
    }

    #[test]
    fn output_is_feasible_for_large_inputs() {
        let spec = BipartitePolytopeSpec::new(6, vec![2, 2], 2, [(0, 0), (0, 1), (1, 1)]).unwrap();
        let z = BipartitePoint {
            coords: (0..spec.dim()).map(|k| ((k * 37 % 11) as f64 - 3.0) * 1.7).collect(),
        };
        let out = dykstra_project_bipartite(&z, &spec, DYKSTRA_TOL, DYKSTRA_MAX_ITERS).unwrap();
        assert!(spec.max_violation(&out.point.coords) <= 1e-9);
        assert!(out.residual <= 1e-4, "{} after {}", out.residual, out.iterations);
    }

    #[test]
    fn rejects_bad_input() {
        let spec = single_pair(2, 1);
        let z = BipartitePoint::zeros(&spec);
        assert!(matches!(
            dykstra_project_bipartite(&z, &spec, 0.0, 10),
            Err(ProjectionError::InvalidTolerance(_))
        ));
        let short = BipartitePoint { coords: vec![0.0; 3] };
        assert!(matches!(
            dykstra_project_bipartite(&short, &spec, 1e-6, 10),
            Err(ProjectionError::DimensionMismatch { .. })
        ));
        let mut nan = BipartitePoint::zeros(&spec);
        nan.coords[1] = f64::NAN;
        assert!(matches!(
            dykstra_project_bipartite(&nan, &spec, 1e-6, 10),
            Err(ProjectionError::NonFinite { .. })
        ));
    }

    #[test]
    fn reports_non_convergence() {
        let spec = BipartitePolytopeSpec::new(4, vec![1], 2, [(0, 0), (1, 0)]).unwrap();
        let z = BipartitePoint {
            coords: (0..spec.dim()).map(|k| 5.0 + k as f64).collect(),
        };
        assert!(matches!(
            dykstra_project_bipartite(&z, &spec, 1e-12, 1),
            Err(ProjectionError::NotConverged { iterations: 1, .. })
        ));
    }
}
