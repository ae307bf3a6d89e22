//! n-dimensional Delaunay tessellation, point location and barycentric
//! coordinates over normalized sensor points.
//!
//! A [`Tessellation`] is immutable once built and can be shared freely
//! between threads.

mod hull;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

/// Highest supported space dimension. Corner anchors alone number `2^n`.
pub const MAX_DIMENSION: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("points span fewer than {dim} dimensions")]
    DimensionTooLow { dim: usize },
    #[error("dimension {0} exceeds the supported maximum of {MAX_DIMENSION}")]
    DimensionTooHigh(usize),
    #[error("need at least {needed} points in {dim} dimensions, got {got}")]
    TooFewPoints {
        dim: usize,
        needed: usize,
        got: usize,
    },
    #[error("points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("expected a {expected}-dimensional point, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate in point {0}")]
    NonFinite(usize),
    #[error("simplex {0} is degenerate")]
    DegenerateSimplex(usize),
    #[error("no simplex with id {0}")]
    InvalidSimplex(usize),
}

/// Numeric tolerances. The defaults are the ones every test pins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Smallest barycentric weight still counted as inside a simplex.
    pub containment: f64,
    /// Points closer than this are duplicates.
    pub duplicate: f64,
    /// Perturbation magnitude, relative to the bounding-box diagonal.
    pub perturbation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            containment: 1e-9,
            duplicate: 1e-12,
            perturbation: 1e-9,
        }
    }
}

/// A position in normalized sensor space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

/// `n + 1` vertex indices into the tessellation's point list, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Simplex(Vec<usize>);

impl Simplex {
    pub fn vertices(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycentricCoords {
    pub simplex_id: usize,
    /// One weight per simplex vertex, in [`Simplex::vertices`] order.
    pub weights: Vec<f64>,
}

/// Result of point location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside(usize),
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tessellation {
    dim: usize,
    points: Vec<Point>,
    simplices: Vec<Simplex>,
    /// `neighbors[s][i]` is the simplex across the facet opposite vertex `i`
    /// of simplex `s`, or `None` on the hull boundary.
    neighbors: Vec<Vec<Option<usize>>>,
    tolerances: Tolerances,
}

/// Builds the Delaunay tessellation of `points` with default tolerances.
pub fn delaunay_tessellate(points: &[Point]) -> Result<Tessellation, GeometryError> {
    Tessellation::build(points, Tolerances::default())
}

impl Tessellation {
    pub fn build(points: &[Point], tolerances: Tolerances) -> Result<Self, GeometryError> {
        let dim = points.first().map_or(0, Point::dim);
        if dim == 0 {
            return Err(GeometryError::TooFewPoints {
                dim: 1,
                needed: 2,
                got: points.len(),
            });
        }
        if dim > MAX_DIMENSION {
            return Err(GeometryError::DimensionTooHigh(dim));
        }
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if p.0.iter().any(|c| !c.is_finite()) {
                return Err(GeometryError::NonFinite(i));
            }
        }
        if points.len() < dim + 1 {
            return Err(GeometryError::TooFewPoints {
                dim,
                needed: dim + 1,
                got: points.len(),
            });
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i].distance(&points[j]) <= tolerances.duplicate {
                    return Err(GeometryError::DuplicatePoints(i, j));
                }
            }
        }

        let raw: Vec<Vec<f64>> = points.iter().map(|p| p.0.clone()).collect();
        let (lo, hi) = hull::bounding_box(&raw, dim);
        let diag = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        if affine_rank(&raw, diag * 1e-9) < dim {
            return Err(GeometryError::DimensionTooLow { dim });
        }

        // Simplices that are flat in the unperturbed coordinates only exist
        // because of the perturbation (collinear hull points and the like).
        let min_volume = 1e-12 * diag.powi(dim as i32) / factorial(dim);
        let mut simplices: Vec<Simplex> = hull::lower_hull(&raw, dim, tolerances.perturbation)
            .into_iter()
            .filter(|verts| volume_of(&raw, verts) > min_volume)
            .map(Simplex)
            .collect();
        simplices.sort_unstable_by(|a, b| a.0.cmp(&b.0));

        let neighbors = neighbor_table(&simplices);
        Ok(Tessellation {
            dim,
            points: points.to_vec(),
            simplices,
            neighbors,
            tolerances,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn neighbors(&self, simplex_id: usize) -> &[Option<usize>] {
        &self.neighbors[simplex_id]
    }

    pub fn simplex(&self, simplex_id: usize) -> Result<&Simplex, GeometryError> {
        self.simplices
            .get(simplex_id)
            .ok_or(GeometryError::InvalidSimplex(simplex_id))
    }

    /// `|det(v_1 - v_0, ..., v_n - v_0)| / n!`
    pub fn simplex_volume(&self, simplex_id: usize) -> Result<f64, GeometryError> {
        let s = self.simplex(simplex_id)?;
        let raw: Vec<&[f64]> = s.0.iter().map(|&v| self.points[v].coords()).collect();
        Ok(volume_of_refs(&raw, self.dim))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.simplices.len())
            .map(|s| self.simplex_volume(s).unwrap_or(0.0))
            .sum()
    }

    /// Solves `p = sum w_i v_i`, `sum w_i = 1` for the vertices of a simplex.
    ///
    /// A point that coincides exactly with a vertex gets an exact one-hot
    /// weight vector.
    pub fn barycentric_coordinates(
        &self,
        simplex_id: usize,
        p: &Point,
    ) -> Result<BarycentricCoords, GeometryError> {
        if p.dim() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: p.dim(),
            });
        }
        let s = self.simplex(simplex_id)?;
        let n = self.dim;
        if let Some(j) = s.0.iter().position(|&v| self.points[v] == *p) {
            let mut weights = vec![0.0; n + 1];
            weights[j] = 1.0;
            return Ok(BarycentricCoords {
                simplex_id,
                weights,
            });
        }
        let v0 = self.points[s.0[0]].coords();
        // Column k of the system is v_{k+1} - v_0.
        let mut m = vec![0.0; n * n];
        for (k, &v) in s.0[1..].iter().enumerate() {
            let vk = self.points[v].coords();
            for r in 0..n {
                m[r * n + k] = vk[r] - v0[r];
            }
        }
        let rhs: Vec<f64> = p.coords().iter().zip(v0).map(|(a, b)| a - b).collect();
        let lambda =
            linalg::solve(&mut m, n, &rhs).ok_or(GeometryError::DegenerateSimplex(simplex_id))?;
        let mut weights = Vec::with_capacity(n + 1);
        weights.push(1.0 - lambda.iter().sum::<f64>());
        weights.extend(lambda);
        Ok(BarycentricCoords {
            simplex_id,
            weights,
        })
    }

    /// Lowest-id simplex whose barycentric weights for `p` are all at least
    /// `-containment`, by a scan over every simplex.
    pub fn locate_simplex(&self, p: &Point) -> Result<Location, GeometryError> {
        if p.dim() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: p.dim(),
            });
        }
        for id in 0..self.simplices.len() {
            if self.contains(id, p)? {
                return Ok(Location::Inside(id));
            }
        }
        Ok(Location::Outside)
    }

    /// Visibility walk from `start` across the facet with the most negative
    /// weight. Faster than [`Self::locate_simplex`] on large tessellations but
    /// returns *a* containing simplex, not necessarily the lowest id. Falls
    /// back to the scan when the walk leaves the hull or cycles.
    pub fn locate_walk(&self, start: usize, p: &Point) -> Result<Location, GeometryError> {
        if self.simplices.is_empty() {
            return Ok(Location::Outside);
        }
        let mut current = start.min(self.simplices.len() - 1);
        for _ in 0..self.simplices.len() + 1 {
            let bc = self.barycentric_coordinates(current, p)?;
            let (worst, w) = bc
                .weights
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("simplex has vertices");
            if w >= -self.tolerances.containment {
                return Ok(Location::Inside(current));
            }
            match self.neighbors[current][worst] {
                Some(next) => current = next,
                None => break,
            }
        }
        self.locate_simplex(p)
    }

    fn contains(&self, id: usize, p: &Point) -> Result<bool, GeometryError> {
        let bc = self.barycentric_coordinates(id, p)?;
        Ok(bc
            .weights
            .iter()
            .all(|&w| w >= -self.tolerances.containment))
    }
}

fn neighbor_table(simplices: &[Simplex]) -> Vec<Vec<Option<usize>>> {
    let mut table: Vec<Vec<Option<usize>>> =
        simplices.iter().map(|s| vec![None; s.0.len()]).collect();
    let mut open: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
    for (sid, s) in simplices.iter().enumerate() {
        for skip in 0..s.0.len() {
            let facet: Vec<usize> =
                s.0.iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .map(|(_, &v)| v)
                    .collect();
            if let Some((other, other_skip)) = open.remove(&facet) {
                table[sid][skip] = Some(other);
                table[other][other_skip] = Some(sid);
            } else {
                open.insert(facet, (sid, skip));
            }
        }
    }
    table
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn volume_of(points: &[Vec<f64>], verts: &[usize]) -> f64 {
    let refs: Vec<&[f64]> = verts.iter().map(|&v| points[v].as_slice()).collect();
    volume_of_refs(&refs, verts.len() - 1)
}

fn volume_of_refs(verts: &[&[f64]], n: usize) -> f64 {
    let v0 = verts[0];
    let mut m = Vec::with_capacity(n * n);
    for v in &verts[1..] {
        m.extend(v.iter().zip(v0).map(|(a, b)| a - b));
    }
    linalg::determinant(&mut m, n).abs() / factorial(n)
}

/// Dimension of the affine span, counting directions longer than `tol`.
fn affine_rank(points: &[Vec<f64>], tol: f64) -> usize {
    let origin = &points[0];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    loop {
        let best = points
            .iter()
            .map(|p| hull::residual(p, origin, &basis))
            .map(|r| {
                let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                (norm, r)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0));
        match best {
            Some((norm, r)) if norm > tol && norm > 0.0 && basis.len() < origin.len() => {
                basis.push(r.into_iter().map(|x| x / norm).collect());
            }
            _ => return basis.len(),
        }
    }
}
