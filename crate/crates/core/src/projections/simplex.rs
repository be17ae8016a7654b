use std::cmp::Ordering;

use super::{check_finite, ProjectionError};
use crate::model::FractionalAllocation;

/// Projection onto `{x ∈ [0,1]^N : Σx ≤ C}`.
pub fn project_capped_simplex(z: &[f64], capacity: f64) -> Result<FractionalAllocation, ProjectionError> {
    project_capped_simplex_with_multiplier(z, capacity).map(|(x, _)| x)
}

/// Same as [`project_capped_simplex`], also returning the multiplier λ ≥ 0
/// such that `x = clip(z − λ, 0, 1)`.
///
/// `f(λ) = Σ clip(z_i − λ, 0, 1)` is piecewise linear with breakpoints at
/// `z_i − 1` (coordinate leaves the upper bound) and `z_i` (coordinate
/// reaches zero). The breakpoints are sorted and walked until `f` crosses
/// the capacity, then λ is solved on that linear piece.
pub fn project_capped_simplex_with_multiplier(
    z: &[f64],
    capacity: f64,
) -> Result<(FractionalAllocation, f64), ProjectionError> {
    check_finite(z)?;
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(ProjectionError::InvalidCapacity(capacity));
    }

    let boxed: f64 = z.iter().map(|&v| v.clamp(0.0, 1.0)).sum();
    if boxed <= capacity {
        return Ok((
            FractionalAllocation::new(z.iter().map(|&v| v.clamp(0.0, 1.0)).collect()),
            0.0,
        ));
    }

    // (position, index, +1 entering interior / -1 leaving)
    let mut events: Vec<(f64, usize, i32)> = Vec::with_capacity(2 * z.len());
    let mut interior = 0i64;
    for (i, &v) in z.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        if v - 1.0 > 0.0 {
            events.push((v - 1.0, i, 1));
        } else {
            interior += 1;
        }
        events.push((v, i, -1));
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));

    let mut lambda = 0.0;
    let mut value = boxed;
    let mut solved = None;
    for &(pos, _, delta) in &events {
        let next = value - interior as f64 * (pos - lambda);
        if next <= capacity && interior > 0 {
            solved = Some(lambda + (value - capacity) / interior as f64);
            break;
        }
        value = next;
        lambda = pos;
        interior += delta as i64;
    }
    // f reaches 0 after the last event, so the walk always crosses C > 0.
    let lambda = solved.unwrap_or(lambda);
    let x = z.iter().map(|&v| (v - lambda).clamp(0.0, 1.0)).collect();
    Ok((FractionalAllocation::new(x), lambda))
}

/// Projection onto `{x ∈ [0,1]^N : Σ s_i x_i ≤ C}`.
///
/// The solution is `x = clip(z − λ s, 0, 1)`; λ is bracketed by bisection on
/// the monotone map `λ ↦ Σ s_i clip(z_i − λ s_i, 0, 1)`, with a linear solve
/// on the current active pattern tried at every step so the loop usually
/// terminates after a handful of iterations.
pub fn project_weighted_capped_simplex(
    z: &[f64],
    sizes: &[f64],
    capacity: f64,
) -> Result<FractionalAllocation, ProjectionError> {
    check_finite(z)?;
    if sizes.len() != z.len() {
        return Err(ProjectionError::DimensionMismatch {
            expected: z.len(),
            actual: sizes.len(),
        });
    }
    if let Some(index) = sizes.iter().position(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(ProjectionError::NonPositiveSize {
            index,
            size: sizes[index],
        });
    }
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(ProjectionError::InvalidCapacity(capacity));
    }

    let load = |lambda: f64| -> f64 {
        z.iter()
            .zip(sizes)
            .map(|(&v, &s)| s * (v - lambda * s).clamp(0.0, 1.0))
            .sum()
    };
    if load(0.0) <= capacity {
        return Ok(FractionalAllocation::new(
            z.iter().map(|&v| v.clamp(0.0, 1.0)).collect(),
        ));
    }

    let tol = 1e-10 * capacity;
    let mut lo = 0.0;
    let mut hi = z.iter().zip(sizes).map(|(&v, &s)| v / s).fold(0.0, f64::max);
    let mut lambda = hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (mut lin, mut quad, mut capped, mut total) = (0.0, 0.0, 0.0, 0.0);
        for (&v, &s) in z.iter().zip(sizes) {
            let x = v - mid * s;
            if x >= 1.0 {
                capped += s;
                total += s;
            } else if x > 0.0 {
                lin += s * v;
                quad += s * s;
                total += s * x;
            }
        }
        if quad > 0.0 {
            let candidate = (lin + capped - capacity) / quad;
            if (lo..=hi).contains(&candidate) {
                let at = load(candidate);
                if at <= capacity + tol && at >= capacity - tol {
                    lambda = candidate;
                    break;
                }
            }
        }
        if total > capacity {
            lo = mid;
        } else {
            hi = mid;
        }
        lambda = hi;
        if capacity - load(hi) <= tol {
            break;
        }
    }
    let x = z
        .iter()
        .zip(sizes)
        .map(|(&v, &s)| (v - lambda * s).clamp(0.0, 1.0))
        .collect();
    Ok(FractionalAllocation::new(x))
}

/// Projection onto `{(a, b) : a, b ≥ 0, a + b = 1}`.
pub fn project_two_simplex(w: (f64, f64)) -> (f64, f64) {
    let p = ((w.0 - w.1 + 1.0) / 2.0).clamp(0.0, 1.0);
    (p, 1.0 - p)
}
