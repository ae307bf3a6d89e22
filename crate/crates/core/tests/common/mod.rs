//! Test-only helpers. Nothing here calls into the crate's geometry or linear
//! algebra so the oracles stay independent of the code they check.
#![allow(dead_code)]

use sensorspace_core::geometry::Point;

/// Knuth MMIX linear congruential generator.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed ^ 0x2545_f491_4f6c_dd1d)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        self.0
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn random_points(rng: &mut Lcg, dim: usize, count: usize) -> Vec<Point> {
    (0..count)
        .map(|_| Point::new((0..dim).map(|_| rng.next_f64()).collect()))
        .collect()
}

pub fn affine_value(coeffs: &[f64], x: &[f64]) -> f64 {
    coeffs[0] + x.iter().zip(&coeffs[1..]).map(|(a, c)| a * c).sum::<f64>()
}

/// Determinant by cofactor expansion (exponential, fine up to 4x4).
pub fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(k, _)| k != c)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][c] * cofactor_det(&minor)
            })
            .sum(),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Convex hull volume for points in general position: every `n`-subset
/// with all remaining points strictly on one side is a facet, and the hull
/// is the union of cones from the centroid over those facets.
pub fn brute_force_hull_volume(points: &[Point]) -> f64 {
    let dim = points[0].dim();
    if dim == 1 {
        let xs: Vec<f64> = points.iter().map(|p| p.coords()[0]).collect();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        return hi - lo;
    }
    let centroid: Vec<f64> = (0..dim)
        .map(|k| points.iter().map(|p| p.coords()[k]).sum::<f64>() / points.len() as f64)
        .collect();
    let side = |facet: &[usize], q: &[f64]| -> f64 {
        let base = points[facet[0]].coords();
        let mut rows: Vec<Vec<f64>> = facet[1..]
            .iter()
            .map(|&v| {
                points[v]
                    .coords()
                    .iter()
                    .zip(base)
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        rows.push(q.iter().zip(base).map(|(a, b)| a - b).collect());
        cofactor_det(&rows)
    };
    let mut volume = 0.0;
    for facet in combinations(points.len(), dim) {
        let mut pos = false;
        let mut neg = false;
        for (i, p) in points.iter().enumerate() {
            if facet.contains(&i) {
                continue;
            }
            let s = side(&facet, p.coords());
            pos |= s > 0.0;
            neg |= s < 0.0;
            if pos && neg {
                break;
            }
        }
        if pos != neg {
            volume += side(&facet, &centroid).abs() / factorial(dim);
        }
    }
    volume
}

/// Center and squared radius of the sphere through `n + 1` points.
pub fn circumsphere(verts: &[&[f64]]) -> (Vec<f64>, f64) {
    let n = verts.len() - 1;
    let v0 = verts[0];
    // 2 (v_i - v_0) . c = |v_i|^2 - |v_0|^2
    let mut a: Vec<Vec<f64>> = verts[1..]
        .iter()
        .map(|v| {
            let mut row: Vec<f64> = v.iter().zip(v0).map(|(x, y)| 2.0 * (x - y)).collect();
            let rhs = v.iter().map(|x| x * x).sum::<f64>() - v0.iter().map(|x| x * x).sum::<f64>();
            row.push(rhs);
            row
        })
        .collect();
    // Gauss-Jordan with partial pivoting on the augmented matrix.
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot[col];
                for (x, p) in row.iter_mut().zip(&pivot).skip(col) {
                    *x -= f * p;
                }
            }
        }
    }
    let center: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
    let r2 = center.iter().zip(v0).map(|(c, v)| (c - v) * (c - v)).sum();
    (center, r2)
}
