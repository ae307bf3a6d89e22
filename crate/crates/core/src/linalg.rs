//! Dense LU with partial pivoting for the tiny systems the geometry needs
//! (at most 7x7). Matrices are row-major slices.

/// In-place LU decomposition. Returns the permutation parity (+1/-1), or
/// `None` when a pivot is exactly zero.
fn decompose(a: &mut [f64], n: usize, perm: &mut [usize]) -> Option<f64> {
    debug_assert_eq!(a.len(), n * n);
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    let mut parity = 1.0;
    for col in 0..n {
        let mut best = col;
        let mut best_abs = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best_abs {
                best = row;
                best_abs = v;
            }
        }
        if best_abs == 0.0 || !best_abs.is_finite() {
            return None;
        }
        if best != col {
            for k in 0..n {
                a.swap(col * n + k, best * n + k);
            }
            perm.swap(col, best);
            parity = -parity;
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / pivot;
            a[row * n + col] = f;
            if f != 0.0 {
                for k in col + 1..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
            }
        }
    }
    Some(parity)
}

/// Determinant of an `n x n` row-major matrix. Consumes the buffer.
pub(crate) fn determinant(a: &mut [f64], n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut perm = vec![0; n];
    match decompose(a, n, &mut perm) {
        None => 0.0,
        Some(parity) => (0..n).fold(parity, |acc, i| acc * a[i * n + i]),
    }
}

/// Solves `a x = b`. Consumes `a`; returns `None` for a singular matrix.
pub(crate) fn solve(a: &mut [f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut perm = vec![0; n];
    decompose(a, n, &mut perm)?;
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for k in 0..i {
            x[i] -= a[i * n + k] * x[k];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= a[i * n + k] * x[k];
        }
        x[i] /= a[i * n + i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}
