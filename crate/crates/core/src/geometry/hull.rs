//! Delaunay simplices as the lower convex hull of points lifted onto the
//! paraboloid `z = |x|^2`, built with a beneath-beyond incremental hull.
//!
//! All predicates run on perturbed copies of the input: point `i` is moved by
//! `eps * diag * h(i)` where `h` is a fixed hash sequence in `[-1, 1)^n`. The
//! caller's coordinates are never modified; this only breaks ties such as
//! cospherical or collinear configurations.

use std::collections::HashMap;

use crate::hash::{splitmix64, unit_symmetric};
use crate::linalg;

const PERTURBATION_SEED: u64 = 0x5e45_0a5e_d31a_0001;

/// Offset direction applied to point `index`, component `axis`.
pub(crate) fn perturbation(index: usize, axis: usize) -> f64 {
    let key = PERTURBATION_SEED ^ splitmix64((index as u64) << 8 | axis as u64);
    unit_symmetric(splitmix64(key))
}

/// Returns the vertex sets (sorted ascending) of the lower hull facets of the
/// lifted, perturbed point set, i.e. the Delaunay simplices of the perturbed
/// points. Assumes the points span `n` dimensions.
pub(crate) fn lower_hull(points: &[Vec<f64>], dim: usize, epsilon: f64) -> Vec<Vec<usize>> {
    let d = dim + 1;
    if points.len() == d {
        // A single simplex; its lifted hull would be flat.
        return vec![(0..d).collect()];
    }
    let lifted = lift(points, dim, epsilon);
    let Some(initial) = initial_simplex(&lifted, d) else {
        return Vec::new();
    };

    let reference: Vec<f64> = (0..d)
        .map(|k| initial.iter().map(|&i| lifted[i][k]).sum::<f64>() / (d + 1) as f64)
        .collect();

    let mut facets: Vec<Facet> = Vec::new();
    for skip in 0..=d {
        let verts: Vec<usize> = initial
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != skip)
            .map(|(_, &v)| v)
            .collect();
        facets.push(Facet::new(verts, &lifted, &reference));
    }

    let mut in_hull = vec![false; lifted.len()];
    for &i in &initial {
        in_hull[i] = true;
    }

    for q in 0..lifted.len() {
        if in_hull[q] {
            continue;
        }
        let visible: Vec<usize> = facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && f.sees(&lifted, &lifted[q]))
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        in_hull[q] = true;

        // Ridges owned by exactly one visible facet form the horizon.
        let mut ridges: HashMap<Vec<usize>, usize> = HashMap::new();
        for &fi in &visible {
            let verts = &facets[fi].verts;
            for skip in 0..verts.len() {
                let ridge: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                *ridges.entry(ridge).or_insert(0) += 1;
            }
            facets[fi].alive = false;
        }
        let mut horizon: Vec<Vec<usize>> = ridges
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(r, _)| r)
            .collect();
        // HashMap iteration order is not deterministic.
        horizon.sort_unstable();
        for mut verts in horizon {
            verts.push(q);
            facets.push(Facet::new(verts, &lifted, &reference));
        }
        facets.retain(|f| f.alive);
    }

    facets
        .into_iter()
        .filter(|f| f.alive && f.is_lower(&lifted))
        .map(|f| f.verts)
        .collect()
}

struct Facet {
    verts: Vec<usize>,
    /// Sign of the orientation determinant at the interior reference point.
    inside_sign: f64,
    alive: bool,
}

impl Facet {
    fn new(mut verts: Vec<usize>, lifted: &[Vec<f64>], reference: &[f64]) -> Self {
        verts.sort_unstable();
        let o = orientation(lifted, &verts, reference);
        Facet {
            verts,
            inside_sign: if o < 0.0 { -1.0 } else { 1.0 },
            alive: true,
        }
    }

    fn sees(&self, lifted: &[Vec<f64>], q: &[f64]) -> bool {
        orientation(lifted, &self.verts, q) * self.inside_sign < 0.0
    }

    /// Outward normal points down in the lifted coordinate.
    ///
    /// The coefficient of the last coordinate in the orientation determinant
    /// is the signed volume of the facet projected back to `n` dimensions.
    fn is_lower(&self, lifted: &[Vec<f64>]) -> bool {
        let n = self.verts.len() - 1;
        let base = &lifted[self.verts[0]];
        let mut m = Vec::with_capacity(n * n);
        for &v in &self.verts[1..] {
            for k in 0..n {
                m.push(lifted[v][k] - base[k]);
            }
        }
        linalg::determinant(&mut m, n) * self.inside_sign > 0.0
    }
}

/// Determinant of `[v_1 - v_0, ..., v_{d-1} - v_0, q - v_0]`.
fn orientation(lifted: &[Vec<f64>], verts: &[usize], q: &[f64]) -> f64 {
    let d = q.len();
    let base = &lifted[verts[0]];
    let mut m = Vec::with_capacity(d * d);
    for &v in &verts[1..] {
        m.extend(lifted[v].iter().zip(base).map(|(a, b)| a - b));
    }
    m.extend(q.iter().zip(base).map(|(a, b)| a - b));
    linalg::determinant(&mut m, d)
}

/// Perturbs, centers and scales the points into the unit ball, then appends
/// the squared norm as the lifted coordinate.
fn lift(points: &[Vec<f64>], dim: usize, epsilon: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = bounding_box(points, dim);
    let diag = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    let scale = if diag > 0.0 { diag } else { 1.0 };
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut u: Vec<f64> = (0..dim)
                .map(|k| {
                    let shifted = p[k] + epsilon * scale * perturbation(i, k);
                    (shifted - center[k]) / scale
                })
                .collect();
            let z = u.iter().map(|x| x * x).sum();
            u.push(z);
            u
        })
        .collect()
}

pub(crate) fn bounding_box(points: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Greedy choice of `d + 1` affinely independent points: start from the
/// lexicographically smallest, then repeatedly take the point farthest from
/// the affine span of those already chosen.
fn initial_simplex(points: &[Vec<f64>], d: usize) -> Option<Vec<usize>> {
    let first = (0..points.len()).min_by(|&a, &b| {
        points[a]
            .partial_cmp(&points[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    })?;
    let mut chosen = vec![first];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while chosen.len() < d + 1 {
        let origin = &points[chosen[0]];
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for (i, p) in points.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let r = residual(p, origin, &basis);
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(_, b, _)| norm > *b) {
                best = Some((i, norm, r));
            }
        }
        let (i, norm, r) = best?;
        if norm <= 1e-300 {
            return None;
        }
        basis.push(r.into_iter().map(|x| x / norm).collect());
        chosen.push(i);
    }
    Some(chosen)
}

/// Component of `p - origin` orthogonal to the orthonormal `basis`
/// (modified Gram-Schmidt, applied twice).
pub(crate) fn residual(p: &[f64], origin: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r: Vec<f64> = p.iter().zip(origin).map(|(a, b)| a - b).collect();
    for _ in 0..2 {
        for b in basis {
            let dot: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in r.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
    }
    r
}
