//! Real Schur decomposition: Hessenberg reduction followed by shifted QR
//! iteration with deflation (Francis double-shift sweeps).

use ndarray::Array2;

use super::hessenberg::hessenberg_reduce;
use super::{ensure_finite, ensure_square, frob, SchurFactors};
use crate::error::{Error, Result};

/// Compute the real Schur decomposition `b = q t qᵀ` with `q` orthogonal and
/// `t` quasi-upper-triangular (1x1 or 2x2 diagonal blocks; a 2x2 block holds
/// a complex-conjugate eigenvalue pair).
///
/// Iteration budget is 30·n double-shift sweeps; exceeding it reports how
/// much of the spectrum had deflated by then.
pub fn real_schur(b: &Array2<f64>) -> Result<SchurFactors> {
    ensure_square("schur input", b)?;
    ensure_finite("schur input", b)?;

    let n = b.nrows();
    let reduced = hessenberg_reduce(b)?;
    let mut h = reduced.t;
    let mut z = reduced.q;
    if n <= 1 {
        return Ok(SchurFactors { q: z, t: h });
    }

    let hnorm = frob(&h);
    let max_sweeps = 30 * n;
    let mut sweeps = 0usize;
    let mut stagnation = 0usize;
    let mut high = n - 1;

    loop {
        // zero negligible subdiagonals in the live region
        for i in 0..high {
            if negligible(&h, i, hnorm) {
                h[[i + 1, i]] = 0.0;
            }
        }
        // start of the irreducible block ending at `high`
        let mut low = high;
        while low > 0 && h[[low, low - 1]] != 0.0 {
            low -= 1;
        }

        if low == high {
            if high == 0 {
                break;
            }
            high -= 1;
            stagnation = 0;
            continue;
        }
        if low + 1 == high {
            split_two_by_two(&mut h, &mut z, low);
            if low == 0 {
                break;
            }
            high = low - 1;
            stagnation = 0;
            continue;
        }

        sweeps += 1;
        stagnation += 1;
        if sweeps > max_sweeps {
            return Err(Error::Convergence(format!(
                "real Schur QR exceeded {max_sweeps} sweeps; deflated {} of {n} eigenvalues, active block {low}..={high}",
                n - 1 - high
            )));
        }
        francis_sweep(&mut h, &mut z, low, high, stagnation);
    }

    // explicit zeroing below the first subdiagonal
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            h[[i, j]] = 0.0;
        }
    }
    Ok(SchurFactors { q: z, t: h })
}

fn negligible(h: &Array2<f64>, i: usize, hnorm: f64) -> bool {
    let s = h[[i, i]].abs() + h[[i + 1, i + 1]].abs();
    let s = if s == 0.0 { hnorm } else { s };
    h[[i + 1, i]].abs() <= f64::EPSILON * s
}

/// Isolated 2x2 block at rows/cols (p, p+1). Real eigenvalues are split with
/// a rotation (leaving two 1x1 blocks); a complex pair is kept as is.
fn split_two_by_two(h: &mut Array2<f64>, z: &mut Array2<f64>, p: usize) {
    let n = h.nrows();
    let a11 = h[[p, p]];
    let a12 = h[[p, p + 1]];
    let a21 = h[[p + 1, p]];
    let a22 = h[[p + 1, p + 1]];
    let half_diff = 0.5 * (a11 - a22);
    let disc = half_diff * half_diff + a12 * a21;
    if disc < 0.0 {
        return; // complex pair stays as a 2x2 block
    }
    let mean = 0.5 * (a11 + a22);
    let root = disc.sqrt();
    let lam1 = mean + root;
    let lam2 = mean - root;
    let lam = if (lam1 - a22).abs() >= (lam2 - a22).abs() {
        lam1
    } else {
        lam2
    };
    // eigenvector (lam − a22, a21); a21 ≠ 0 because the block did not deflate
    let v0 = lam - a22;
    let v1 = a21;
    let r = (v0 * v0 + v1 * v1).sqrt();
    let c = v0 / r;
    let s = v1 / r;
    // similarity: rows p,p+1 (left, Gᵀ) then cols p,p+1 (right, G)
    for j in p..n {
        let t0 = h[[p, j]];
        let t1 = h[[p + 1, j]];
        h[[p, j]] = c * t0 + s * t1;
        h[[p + 1, j]] = -s * t0 + c * t1;
    }
    for i in 0..=p + 1 {
        let t0 = h[[i, p]];
        let t1 = h[[i, p + 1]];
        h[[i, p]] = c * t0 + s * t1;
        h[[i, p + 1]] = -s * t0 + c * t1;
    }
    for i in 0..n {
        let t0 = z[[i, p]];
        let t1 = z[[i, p + 1]];
        z[[i, p]] = c * t0 + s * t1;
        z[[i, p + 1]] = -s * t0 + c * t1;
    }
    h[[p + 1, p]] = 0.0;
}

/// One implicit double-shift sweep on the active window [low..=high]
/// (window size ≥ 3), accumulating the transform into `z`.
fn francis_sweep(h: &mut Array2<f64>, z: &mut Array2<f64>, low: usize, high: usize, stagnation: usize) {
    let n = h.nrows();
    let m = high;
    let l = low;

    // shift sum/product from the trailing 2x2 of the window
    let (mut s, mut t) = {
        let hmm = h[[m - 1, m - 1]];
        let hm = h[[m, m]];
        (hmm + hm, hmm * hm - h[[m - 1, m]] * h[[m, m - 1]])
    };
    if stagnation % 10 == 0 {
        // exceptional shifts to break symmetric stagnation cycles
        let sbar = h[[m, m - 1]].abs() + h[[m - 1, m - 2]].abs();
        s = 1.5 * sbar;
        t = sbar * sbar;
    }

    // first column of (H − aI)(H − bI) restricted to rows l..l+2
    let mut x = h[[l, l]] * h[[l, l]] + h[[l, l + 1]] * h[[l + 1, l]] - s * h[[l, l]] + t;
    let mut y = h[[l + 1, l]] * (h[[l, l]] + h[[l + 1, l + 1]] - s);
    let mut w = h[[l + 1, l]] * h[[l + 2, l + 1]];

    for k in l..=m - 2 {
        if let Some((u, tau)) = householder3(x, y, w) {
            let col_start = if k == l { l } else { k - 1 };
            // left: rows k..k+2
            for j in col_start..n {
                let dot = u[0] * h[[k, j]] + u[1] * h[[k + 1, j]] + u[2] * h[[k + 2, j]];
                let f = tau * dot;
                h[[k, j]] -= f * u[0];
                h[[k + 1, j]] -= f * u[1];
                h[[k + 2, j]] -= f * u[2];
            }
            // right: cols k..k+2, rows up to the bulge front
            let row_end = (k + 3).min(m);
            for i in 0..=row_end {
                let dot = h[[i, k]] * u[0] + h[[i, k + 1]] * u[1] + h[[i, k + 2]] * u[2];
                let f = tau * dot;
                h[[i, k]] -= f * u[0];
                h[[i, k + 1]] -= f * u[1];
                h[[i, k + 2]] -= f * u[2];
            }
            for i in 0..n {
                let dot = z[[i, k]] * u[0] + z[[i, k + 1]] * u[1] + z[[i, k + 2]] * u[2];
                let f = tau * dot;
                z[[i, k]] -= f * u[0];
                z[[i, k + 1]] -= f * u[1];
                z[[i, k + 2]] -= f * u[2];
            }
            if k > l {
                // annihilated by construction
                h[[k + 1, k - 1]] = 0.0;
                h[[k + 2, k - 1]] = 0.0;
            }
        }
        x = h[[k + 1, k]];
        y = h[[k + 2, k]];
        if k + 3 <= m {
            w = h[[k + 3, k]];
        } else {
            w = 0.0;
        }
    }

    // final 2-element reflector on rows m-1, m
    if let Some((u, tau)) = householder2(x, y) {
        for j in m - 2..n {
            let dot = u[0] * h[[m - 1, j]] + u[1] * h[[m, j]];
            let f = tau * dot;
            h[[m - 1, j]] -= f * u[0];
            h[[m, j]] -= f * u[1];
        }
        for i in 0..=m {
            let dot = h[[i, m - 1]] * u[0] + h[[i, m]] * u[1];
            let f = tau * dot;
            h[[i, m - 1]] -= f * u[0];
            h[[i, m]] -= f * u[1];
        }
        for i in 0..n {
            let dot = z[[i, m - 1]] * u[0] + z[[i, m]] * u[1];
            let f = tau * dot;
            z[[i, m - 1]] -= f * u[0];
            z[[i, m]] -= f * u[1];
        }
        h[[m, m - 2]] = 0.0;
    }
}

/// Reflector (u, tau) with (I − tau·uuᵀ)(x,y,w)ᵀ ∝ e1; None when y = w = 0.
fn householder3(x: f64, y: f64, w: f64) -> Option<([f64; 3], f64)> {
    if y == 0.0 && w == 0.0 {
        return None;
    }
    let scale = x.abs() + y.abs() + w.abs();
    let xs = x / scale;
    let ys = y / scale;
    let ws = w / scale;
    let norm = (xs * xs + ys * ys + ws * ws).sqrt();
    let alpha = if xs >= 0.0 { -norm } else { norm };
    let u = [xs - alpha, ys, ws];
    let unorm2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    Some((u, 2.0 / unorm2))
}

fn householder2(x: f64, y: f64) -> Option<([f64; 2], f64)> {
    if y == 0.0 {
        return None;
    }
    let scale = x.abs() + y.abs();
    let xs = x / scale;
    let ys = y / scale;
    let norm = (xs * xs + ys * ys).sqrt();
    let alpha = if xs >= 0.0 { -norm } else { norm };
    let u = [xs - alpha, ys];
    let unorm2 = u[0] * u[0] + u[1] * u[1];
    Some((u, 2.0 / unorm2))
}

/// True when `t` is block upper triangular with 1x1/2x2 diagonal blocks and
/// no two adjacent nonzero subdiagonal entries.
pub fn is_quasi_upper_triangular(t: &Array2<f64>) -> bool {
    let n = t.nrows();
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            if t[[i, j]] != 0.0 {
                return false;
            }
        }
    }
    for i in 1..n.saturating_sub(1) {
        if t[[i, i - 1]] != 0.0 && t[[i + 1, i]] != 0.0 {
            return false;
        }
    }
    true
}
