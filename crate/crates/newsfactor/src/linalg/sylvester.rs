//! Hessenberg-Schur solver for the matrix equation AXB + X = C.

use ndarray::{Array1, Array2};

use super::hessenberg::hessenberg_reduce;
use super::schur::real_schur;
use super::{ensure_finite, ensure_square, gauss_solve, SchurFactors};
use crate::error::{Error, Result};

/// A Sylvester instance AXB + X = C with an optional reusable factorization
/// of the right-hand coefficient `b`.
#[derive(Debug)]
pub struct SylvesterProblem<'a> {
    pub a: &'a Array2<f64>,
    pub b: &'a Array2<f64>,
    pub c: &'a Array2<f64>,
    /// Precomputed [`sylvester_rhs_schur`] output for `b`. When present it is
    /// used instead of refactorizing, which is the point of the
    /// Hessenberg-Schur method when `b` is fixed across many solves.
    pub b_schur: Option<&'a SchurFactors>,
}

impl<'a> SylvesterProblem<'a> {
    pub fn new(a: &'a Array2<f64>, b: &'a Array2<f64>, c: &'a Array2<f64>) -> Result<Self> {
        ensure_square("sylvester a", a)?;
        ensure_square("sylvester b", b)?;
        if c.nrows() != a.nrows() || c.ncols() != b.nrows() {
            return Err(Error::Dimension(format!(
                "sylvester c must be {}x{}, got {}x{}",
                a.nrows(),
                b.nrows(),
                c.nrows(),
                c.ncols()
            )));
        }
        ensure_finite("sylvester a", a)?;
        ensure_finite("sylvester b", b)?;
        ensure_finite("sylvester c", c)?;
        Ok(Self { a, b, c, b_schur: None })
    }

    pub fn with_precomputed(
        a: &'a Array2<f64>,
        b: &'a Array2<f64>,
        c: &'a Array2<f64>,
        b_schur: &'a SchurFactors,
    ) -> Result<Self> {
        let mut p = Self::new(a, b, c)?;
        if b_schur.order() != b.nrows() {
            return Err(Error::Dimension(format!(
                "precomputed Schur factors have order {}, b has order {}",
                b_schur.order(),
                b.nrows()
            )));
        }
        p.b_schur = Some(b_schur);
        Ok(p)
    }
}

/// Factorize the right-hand coefficient `b` for reuse across
/// [`solve_sylvester`] calls sharing the same `b`.
///
/// The back substitution consumes the Schur form of `bᵀ` (the transposed
/// orientation in which `s` enters the reduced equation HYSᵀ + Y = F), so
/// that is what gets computed here.
pub fn sylvester_rhs_schur(b: &Array2<f64>) -> Result<SchurFactors> {
    real_schur(&b.t().to_owned())
}

/// Solve AXB + X = C by the Hessenberg-Schur method:
/// reduce `a` to Hessenberg form, `bᵀ` to real Schur form, transform the
/// right-hand side, back substitute, and transform back.
pub fn solve_sylvester(p: &SylvesterProblem) -> Result<Array2<f64>> {
    let ha = hessenberg_reduce(p.a)?;
    let owned;
    let bs = match p.b_schur {
        Some(f) => f,
        None => {
            owned = sylvester_rhs_schur(p.b)?;
            &owned
        }
    };
    // bᵀ = v s vᵀ ⟹ b = v sᵀ vᵀ, so with y = qᵀ x v: h y sᵀ + y = qᵀ c v
    let f = ha.q.t().dot(p.c).dot(&bs.q);
    let y = back_substitute(&ha.t, &bs.t, &f)?;
    Ok(ha.q.dot(&y).dot(&bs.q.t()))
}

/// Solve HYSᵀ + Y = F for Y, with `h` upper Hessenberg (d×d) and `s`
/// quasi-upper-triangular (q×q), processing columns from last to first.
///
/// An isolated column k solves (s_kk·H + I)·y_k = f_k − H·Σ_{j>k} s_kj·y_j.
/// When s[k][k−1] ≠ 0 the two coupled columns are solved simultaneously from
/// the stacked 2d×2d system by Gaussian elimination with partial pivoting.
pub fn back_substitute(h: &Array2<f64>, s: &Array2<f64>, f: &Array2<f64>) -> Result<Array2<f64>> {
    ensure_square("back_substitute h", h)?;
    ensure_square("back_substitute s", s)?;
    let d = h.nrows();
    let q = s.nrows();
    if f.nrows() != d || f.ncols() != q {
        return Err(Error::Dimension(format!(
            "back_substitute f must be {}x{}, got {}x{}",
            d,
            q,
            f.nrows(),
            f.ncols()
        )));
    }

    let mut y = Array2::<f64>::zeros((d, q));
    let eye = Array2::<f64>::eye(d);
    let mut k = q as i64 - 1;
    while k >= 0 {
        let ku = k as usize;
        let coupled = ku > 0 && s[[ku, ku - 1]] != 0.0;
        if !coupled {
            let rhs = column_rhs(h, s, f, &y, ku, ku);
            let mut m = h * s[[ku, ku]];
            m += &eye;
            let rhs2 = rhs.into_shape_with_order((d, 1)).expect("reshape");
            let sol = gauss_solve(&m, &rhs2.to_owned()).map_err(|e| {
                Error::Singular(format!(
                    "(s[{ku}][{ku}]·H + I) singular solving column {ku}: an eigenvalue product s_kk·λ(H) is ≈ −1 ({e})"
                ))
            })?;
            for i in 0..d {
                y[[i, ku]] = sol[[i, 0]];
            }
            k -= 1;
        } else {
            let km = ku - 1;
            if km > 0 && s[[km, km - 1]] != 0.0 {
                return Err(Error::Data(format!(
                    "s has overlapping 2x2 blocks at columns {km},{ku}; not quasi-upper-triangular"
                )));
            }
            let rhs_a = column_rhs(h, s, f, &y, km, ku);
            let rhs_b = column_rhs(h, s, f, &y, ku, ku);
            // [ s_{km,km}H + I   s_{km,ku}H ] [y_km]   [rhs_a]
            // [ s_{ku,km}H       s_{ku,ku}H + I ] [y_ku] = [rhs_b]
            let mut big = Array2::<f64>::zeros((2 * d, 2 * d));
            for i in 0..d {
                for j in 0..d {
                    let hij = h[[i, j]];
                    big[[i, j]] = s[[km, km]] * hij;
                    big[[i, d + j]] = s[[km, ku]] * hij;
                    big[[d + i, j]] = s[[ku, km]] * hij;
                    big[[d + i, d + j]] = s[[ku, ku]] * hij;
                }
                big[[i, i]] += 1.0;
                big[[d + i, d + i]] += 1.0;
            }
            let mut rhs = Array2::<f64>::zeros((2 * d, 1));
            for i in 0..d {
                rhs[[i, 0]] = rhs_a[i];
                rhs[[d + i, 0]] = rhs_b[i];
            }
            let sol = gauss_solve(&big, &rhs).map_err(|e| {
                Error::Singular(format!(
                    "coupled 2x2-block system singular at columns {km},{ku} ({e})"
                ))
            })?;
            for i in 0..d {
                y[[i, km]] = sol[[i, 0]];
                y[[i, ku]] = sol[[d + i, 0]];
            }
            k -= 2;
        }
    }
    Ok(y)
}

/// f_row − H · Σ_{j>after} s[row][j] · y_j
fn column_rhs(
    h: &Array2<f64>,
    s: &Array2<f64>,
    f: &Array2<f64>,
    y: &Array2<f64>,
    row: usize,
    after: usize,
) -> Array1<f64> {
    let d = h.nrows();
    let q = s.nrows();
    let mut rhs = f.column(row).to_owned();
    let mut acc = Array1::<f64>::zeros(d);
    let mut any = false;
    for j in after + 1..q {
        let sj = s[[row, j]];
        if sj != 0.0 {
            acc.scaled_add(sj, &y.column(j));
            any = true;
        }
    }
    if any {
        rhs -= &h.dot(&acc);
    }
    rhs
}

/// Brute-force oracle: solve (Bᵀ ⊗ A + I)·vec(X) = vec(C) by dense LU.
/// Restricted to d·s ≤ 400 unknowns.
pub fn kronecker_oracle(p: &SylvesterProblem) -> Result<Array2<f64>> {
    let d = p.a.nrows();
    let q = p.b.nrows();
    if d * q > 400 {
        return Err(Error::Dimension(format!(
            "kronecker oracle limited to d·s ≤ 400 unknowns, got {}",
            d * q
        )));
    }
    let mut m = Array2::<f64>::zeros((d * q, d * q));
    for j2 in 0..q {
        for i2 in 0..d {
            let row = j2 * d + i2;
            for j1 in 0..q {
                let bj = p.b[[j1, j2]];
                if bj == 0.0 {
                    continue;
                }
                for i1 in 0..d {
                    m[[row, j1 * d + i1]] = bj * p.a[[i2, i1]];
                }
            }
            m[[row, row]] += 1.0;
        }
    }
    let mut rhs = Array2::<f64>::zeros((d * q, 1));
    for j in 0..q {
        for i in 0..d {
            rhs[[j * d + i, 0]] = p.c[[i, j]];
        }
    }
    let sol = gauss_solve(&m, &rhs)?;
    let mut x = Array2::<f64>::zeros((d, q));
    for j in 0..q {
        for i in 0..d {
            x[[i, j]] = sol[[j * d + i, 0]];
        }
    }
    Ok(x)
}

/// ‖AXB + X − C‖_F / max(1, ‖C‖_F)
pub fn sylvester_residual(p: &SylvesterProblem, x: &Array2<f64>) -> f64 {
    let lhs = p.a.dot(x).dot(p.b) + x;
    super::frob(&(&lhs - p.c)) / super::frob(p.c).max(1.0)
}
