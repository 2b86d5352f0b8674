//! Householder reduction to upper Hessenberg form.

use ndarray::Array2;

use super::{ensure_finite, ensure_square, SchurFactors};
use crate::error::Result;

/// Reduce a square matrix to upper Hessenberg form `t` with an accumulated
/// orthogonal `q` such that `a = q t qᵀ`.
///
/// Columns whose below-subdiagonal part is already zero are skipped, so an
/// input that is already Hessenberg comes back unchanged with `q = I`.
pub fn hessenberg_reduce(a: &Array2<f64>) -> Result<SchurFactors> {
    ensure_square("hessenberg input", a)?;
    ensure_finite("hessenberg input", a)?;

    let n = a.nrows();
    let mut h = a.clone();
    let mut q = Array2::<f64>::eye(n);

    for k in 0..n.saturating_sub(2) {
        // Entries strictly below the subdiagonal in column k. If they are
        // already zero the reflector vanishes.
        let tail: f64 = (k + 2..n).map(|i| h[[i, k]] * h[[i, k]]).sum();
        if tail == 0.0 {
            continue;
        }
        let scale: f64 = (k + 1..n).map(|i| h[[i, k]].abs()).fold(0.0, f64::max);
        let m = n - k - 1; // reflector length
        let mut u = vec![0.0; m];
        for (idx, i) in (k + 1..n).enumerate() {
            u[idx] = h[[i, k]] / scale;
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let alpha = if u[0] >= 0.0 { -norm } else { norm };
        u[0] -= alpha;
        let unorm2: f64 = u.iter().map(|v| v * v).sum();
        let tau = 2.0 / unorm2;

        // left: rows k+1..n over columns k..n
        for j in k..n {
            let mut dot = 0.0;
            for (idx, i) in (k + 1..n).enumerate() {
                dot += u[idx] * h[[i, j]];
            }
            let f = tau * dot;
            for (idx, i) in (k + 1..n).enumerate() {
                h[[i, j]] -= f * u[idx];
            }
        }
        // right: columns k+1..n over all rows
        for i in 0..n {
            let mut dot = 0.0;
            for (idx, j) in (k + 1..n).enumerate() {
                dot += h[[i, j]] * u[idx];
            }
            let f = tau * dot;
            for (idx, j) in (k + 1..n).enumerate() {
                h[[i, j]] -= f * u[idx];
            }
        }
        // accumulate q ← q P
        for i in 0..n {
            let mut dot = 0.0;
            for (idx, j) in (k + 1..n).enumerate() {
                dot += q[[i, j]] * u[idx];
            }
            let f = tau * dot;
            for (idx, j) in (k + 1..n).enumerate() {
                q[[i, j]] -= f * u[idx];
            }
        }
        // the reflected column is known exactly
        h[[k + 1, k]] = alpha * scale;
        for i in k + 2..n {
            h[[i, k]] = 0.0;
        }
    }

    // explicit zeroing pass: the invariant is structural, not approximate
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            h[[i, j]] = 0.0;
        }
    }
    Ok(SchurFactors { q, t: h })
}
