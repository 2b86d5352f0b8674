//! Dense linear-algebra kernels: Hessenberg reduction, real Schur
//! decomposition, and the Hessenberg-Schur solver for AXB + X = C.

mod hessenberg;
mod schur;
mod sylvester;

pub use hessenberg::hessenberg_reduce;
pub use schur::{is_quasi_upper_triangular, real_schur};
pub use sylvester::{
    back_substitute, kronecker_oracle, solve_sylvester, sylvester_residual, sylvester_rhs_schur,
    SylvesterProblem,
};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Relative pivot threshold below which elimination reports singularity.
pub(crate) const PIVOT_RTOL: f64 = 1e-12;

/// An orthogonal/condensed pair (q, t) with `original = q · t · qᵀ`.
///
/// `t` is upper Hessenberg when produced by [`hessenberg_reduce`] and
/// quasi-upper-triangular (1x1 or 2x2 diagonal blocks) when produced by
/// [`real_schur`]. Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct SchurFactors {
    /// Orthogonal factor.
    pub q: Array2<f64>,
    /// Condensed factor (Hessenberg or quasi-upper-triangular).
    pub t: Array2<f64>,
}

impl SchurFactors {
    pub fn order(&self) -> usize {
        self.t.nrows()
    }
}

pub(crate) fn ensure_square(name: &str, a: &Array2<f64>) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{} must be square and non-empty, got {}x{}",
            name,
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(name: &str, a: &Array2<f64>) -> Result<()> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{name} contains NaN or infinity")));
    }
    Ok(())
}

/// Frobenius norm.
pub fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solve `a x = rhs` for each column of `rhs` by Gaussian elimination with
/// partial pivoting. Reports singularity when a pivot falls below
/// `PIVOT_RTOL` times the magnitude of its row.
pub(crate) fn gauss_solve(a: &Array2<f64>, rhs: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    ensure_square("gauss_solve lhs", a)?;
    if rhs.nrows() != n {
        return Err(Error::Dimension(format!(
            "gauss_solve rhs has {} rows, expected {}",
            rhs.nrows(),
            n
        )));
    }
    let mut m = a.clone();
    let mut x = rhs.clone();
    let ncols = x.ncols();

    for k in 0..n {
        // partial pivot
        let mut piv = k;
        let mut piv_abs = m[[k, k]].abs();
        for i in k + 1..n {
            let v = m[[i, k]].abs();
            if v > piv_abs {
                piv = i;
                piv_abs = v;
            }
        }
        if piv != k {
            for j in k..n {
                m.swap([k, j], [piv, j]);
            }
            for j in 0..ncols {
                x.swap([k, j], [piv, j]);
            }
        }
        let row_max = (0..n).map(|j| m[[k, j]].abs()).fold(0.0_f64, f64::max);
        if piv_abs <= PIVOT_RTOL * row_max || row_max == 0.0 {
            return Err(Error::Singular(format!(
                "pivot {piv_abs:.3e} at elimination step {k} below {PIVOT_RTOL:.0e} of row magnitude {row_max:.3e}"
            )));
        }
        let pivot = m[[k, k]];
        for i in k + 1..n {
            let factor = m[[i, k]] / pivot;
            if factor == 0.0 {
                continue;
            }
            m[[i, k]] = 0.0;
            for j in k + 1..n {
                m[[i, j]] -= factor * m[[k, j]];
            }
            for j in 0..ncols {
                x[[i, j]] -= factor * x[[k, j]];
            }
        }
    }
    // back substitution
    for k in (0..n).rev() {
        for j in 0..ncols {
            let mut acc = x[[k, j]];
            for i in k + 1..n {
                acc -= m[[k, i]] * x[[i, j]];
            }
            x[[k, j]] = acc / m[[k, k]];
        }
    }
    Ok(x)
}

/// Solve `a x = rhs` (symmetric positive definite `a`) via Cholesky.
pub(crate) fn cholesky_solve(a: &Array2<f64>, rhs: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    ensure_square("cholesky lhs", a)?;
    if rhs.nrows() != n {
        return Err(Error::Dimension(format!(
            "cholesky rhs has {} rows, expected {}",
            rhs.nrows(),
            n
        )));
    }
    // lower-triangular factor
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Singular(format!(
                        "matrix not positive definite at row {i} (pivot {sum:.3e})"
                    )));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    let ncols = rhs.ncols();
    let mut x = rhs.clone();
    // forward: L z = rhs
    for j in 0..ncols {
        for i in 0..n {
            let mut acc = x[[i, j]];
            for k in 0..i {
                acc -= l[[i, k]] * x[[k, j]];
            }
            x[[i, j]] = acc / l[[i, i]];
        }
        // backward: Lᵀ x = z
        for i in (0..n).rev() {
            let mut acc = x[[i, j]];
            for k in i + 1..n {
                acc -= l[[k, i]] * x[[k, j]];
            }
            x[[i, j]] = acc / l[[i, i]];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gauss_solves_small_system() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let rhs = array![[5.0], [10.0]];
        let x = gauss_solve(&a, &rhs).unwrap();
        assert!((x[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((x[[1, 0]] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_reports_singularity() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let rhs = array![[1.0], [2.0]];
        assert!(matches!(gauss_solve(&a, &rhs), Err(Error::Singular(_))));
    }

    #[test]
    fn cholesky_matches_gauss() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let rhs = array![[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]];
        let x1 = cholesky_solve(&a, &rhs).unwrap();
        let x2 = gauss_solve(&a, &rhs).unwrap();
        let diff = frob(&(&x1 - &x2));
        assert!(diff < 1e-12, "cholesky vs gauss diff {diff}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        let rhs = array![[1.0], [1.0]];
        assert!(matches!(cholesky_solve(&a, &rhs), Err(Error::Singular(_))));
    }
}
