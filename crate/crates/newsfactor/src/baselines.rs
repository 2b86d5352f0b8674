//! Reference predictors and portfolios: previous-price/previous-return
//! baselines, per-stock autoregressions, full cross-sectional regression, and
//! uniform / minimum-variance portfolios.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use std::ops::Range;

use crate::data::ReturnsMatrix;
use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;

/// Flat-price baseline: x̂_it = x_{i,t−1}, i.e. r̂ = 0 everywhere.
pub fn previous_x(returns: &ReturnsMatrix, days: Range<usize>) -> Array2<f64> {
    Array2::zeros((returns.n_stocks(), days.len()))
}

/// Flat-return baseline: r̂_it = r_{i,t−1} (day 1 has no predecessor and
/// predicts 0).
pub fn previous_r(returns: &ReturnsMatrix, days: Range<usize>) -> Array2<f64> {
    let n = returns.n_stocks();
    let vals = returns.values();
    let mut out = Array2::<f64>::zeros((n, days.len()));
    for (col, t) in days.enumerate() {
        if t < 2 {
            continue; // no previous return
        }
        out.column_mut(col).assign(&vals.column(t - 2)); // day t−1 sits in column t−2
    }
    out
}

/// Per-stock autoregression: value_t on (value_{t−1..t−p}, 1).
#[derive(Debug, Clone)]
pub struct ArModel {
    pub order: usize,
    /// Lag coefficients φ_1..φ_p followed by the intercept.
    pub coeffs: Array1<f64>,
}

/// Least-squares AR(p) fit. Needs at least 2p+1 samples; a rank-deficient
/// design falls back to ridge with penalty 1e-8 and a warning.
pub fn ar_fit(series: &[f64], p: usize) -> Result<ArModel> {
    if p == 0 {
        return Err(Error::Config("AR order must be ≥ 1".into()));
    }
    if series.len() < 2 * p + 1 {
        return Err(Error::Data(format!(
            "AR({p}) needs at least {} samples, got {}",
            2 * p + 1,
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("AR series contains NaN or infinity".into()));
    }
    let rows = series.len() - p;
    let cols = p + 1;
    let mut design = Array2::<f64>::zeros((rows, cols));
    let mut target = Array2::<f64>::zeros((rows, 1));
    for (row, t) in (p..series.len()).enumerate() {
        for lag in 1..=p {
            design[[row, lag - 1]] = series[t - lag];
        }
        design[[row, p]] = 1.0;
        target[[row, 0]] = series[t];
    }
    let gram = design.t().dot(&design);
    let rhs = design.t().dot(&target);
    let solution = match cholesky_solve(&gram, &rhs) {
        Ok(sol) => sol,
        Err(_) => {
            log::warn!("ar_fit: rank-deficient design, falling back to ridge 1e-8");
            let mut ridged = gram;
            for i in 0..cols {
                ridged[[i, i]] += 1e-8;
            }
            cholesky_solve(&ridged, &rhs)?
        }
    };
    Ok(ArModel {
        order: p,
        coeffs: solution.column(0).to_owned(),
    })
}

/// One-step-ahead prediction from the last `order` values of `history`.
pub fn ar_predict(model: &ArModel, history: &[f64]) -> Result<f64> {
    let p = model.order;
    if history.len() < p {
        return Err(Error::Data(format!(
            "AR({p}) prediction needs {p} history values, got {}",
            history.len()
        )));
    }
    let mut acc = model.coeffs[p]; // intercept
    for lag in 1..=p {
        acc += model.coeffs[lag - 1] * history[history.len() - lag];
    }
    Ok(acc)
}

/// One-step-ahead AR predictions over `days` for every row of `series`
/// (stocks × time columns). Each stock's model is fit once on columns
/// 0..fit_end.
pub fn ar_matrix_predictions(
    series: ArrayView2<'_, f64>,
    p: usize,
    fit_end: usize,
    days: Range<usize>,
) -> Result<Array2<f64>> {
    if fit_end > series.ncols() {
        return Err(Error::Dimension(format!(
            "fit_end {fit_end} exceeds {} columns",
            series.ncols()
        )));
    }
    let n = series.nrows();
    let mut out = Array2::<f64>::zeros((n, days.len()));
    for i in 0..n {
        let row: Vec<f64> = series.row(i).to_vec();
        let model = ar_fit(&row[..fit_end], p)?;
        for (col, t) in days.clone().enumerate() {
            // predicting column t uses history strictly before t
            if t < p {
                continue;
            }
            out[[i, col]] = ar_predict(&model, &row[..t])?;
        }
    }
    Ok(out)
}

/// Cross-sectional one-step regressor: for each target stock, ridge
/// regression of its value on the previous day's values of all stocks plus
/// an intercept (the intercept is not penalized).
#[derive(Debug, Clone)]
pub struct CrossRegressor {
    /// n_targets × (n_predictors + 1); last column is the intercept.
    pub weights: Array2<f64>,
    pub ridge: f64,
}

/// Fit on the columns `train` of `values` (each column a day). Day t's
/// predictor vector is column t−1, so training pairs are (col t−1 → col t).
pub fn cross_regress_fit(
    values: ArrayView2<'_, f64>,
    train: Range<usize>,
    ridge: f64,
) -> Result<CrossRegressor> {
    let n = values.nrows();
    let start = train.start.max(1); // column 0 has no predecessor
    if train.end > values.ncols() || start >= train.end {
        return Err(Error::Data(format!(
            "cross regression needs at least 2 training days in range, got {train:?} over {} columns",
            values.ncols()
        )));
    }
    let rows = train.end - start;
    let mut design = Array2::<f64>::zeros((rows, n + 1));
    for (row, t) in (start..train.end).enumerate() {
        for j in 0..n {
            design[[row, j]] = values[[j, t - 1]];
        }
        design[[row, n]] = 1.0;
    }
    let mut gram = design.t().dot(&design);
    for j in 0..n {
        gram[[j, j]] += ridge; // intercept left unpenalized
    }
    // targets for all stocks at once: rows × n
    let mut targets = Array2::<f64>::zeros((rows, n));
    for (row, t) in (start..train.end).enumerate() {
        for i in 0..n {
            targets[[row, i]] = values[[i, t]];
        }
    }
    let rhs = design.t().dot(&targets);
    let solution = cholesky_solve(&gram, &rhs)?; // (n+1) × n
    Ok(CrossRegressor {
        weights: solution.t().to_owned(),
        ridge,
    })
}

/// Predict all stocks for one day from the previous day's value vector.
pub fn cross_regress_predict(model: &CrossRegressor, prev: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let n = model.weights.nrows();
    if prev.len() + 1 != model.weights.ncols() {
        return Err(Error::Dimension(format!(
            "previous-day vector has {} stocks, model expects {}",
            prev.len(),
            model.weights.ncols() - 1
        )));
    }
    let mut out = Array1::<f64>::zeros(n);
    for i in 0..n {
        let row = model.weights.row(i);
        out[i] = row[prev.len()] + row.slice(ndarray::s![..prev.len()]).dot(&prev);
    }
    Ok(out)
}

/// Ridge grid searched on one-step-ahead validation MSE.
pub const RIDGE_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2];

/// Fit with each grid penalty and keep the one with the lowest one-step
/// validation MSE over the `val` columns.
pub fn cross_regress_choose_ridge(
    values: ArrayView2<'_, f64>,
    train: Range<usize>,
    val: Range<usize>,
) -> Result<CrossRegressor> {
    if val.is_empty() || val.start == 0 {
        return Err(Error::Data("validation range must be non-empty and start past day 1".into()));
    }
    let mut best: Option<(f64, CrossRegressor)> = None;
    for &ridge in RIDGE_GRID.iter() {
        let model = cross_regress_fit(values, train.clone(), ridge)?;
        let mut sse = 0.0;
        let mut count = 0usize;
        for t in val.clone() {
            let pred = cross_regress_predict(&model, values.column(t - 1))?;
            for i in 0..values.nrows() {
                let e = pred[i] - values[[i, t]];
                sse += e * e;
                count += 1;
            }
        }
        let mse = sse / count as f64;
        if best.as_ref().map_or(true, |(b, _)| mse < *b) {
            best = Some((mse, model));
        }
    }
    Ok(best.expect("non-empty grid").1)
}

/// Long-only weights summing to 1, or all zero for "hold cash".
#[derive(Debug, Clone)]
pub struct Portfolio {
    pub weights: Array1<f64>,
}

impl Portfolio {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Data("portfolio weights must be finite and ≥ 0".into()));
        }
        let sum: f64 = self.weights.sum();
        if sum != 0.0 && (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Data(format!(
                "portfolio weights sum to {sum}, expected 0 or 1"
            )));
        }
        Ok(())
    }
}

/// Equal capital on every stock.
pub fn uniform_portfolio(n: usize) -> Result<Portfolio> {
    if n == 0 {
        return Err(Error::Config("uniform portfolio needs at least one stock".into()));
    }
    Ok(Portfolio {
        weights: Array1::from_elem(n, 1.0 / n as f64),
    })
}

/// Long-only minimum-variance portfolio over a historical return window:
///
///   minimize wᵀΣw  s.t.  Σw = 1, w ≥ 0, μᵀw ≥ q,
///
/// where μ holds per-stock window means and q is the `target_quantile`
/// percentile of the pooled window returns. The covariance is shrunk toward
/// its diagonal (δ = 0.1) and the QP is solved by projected gradient descent,
/// projecting onto the simplex-with-halfspace set via Dykstra alternation.
/// An infeasible target (q above every μ_i) is relaxed to max μ_i with a
/// warning.
pub fn min_variance_portfolio(window: ArrayView2<'_, f64>, target_quantile: f64) -> Result<Portfolio> {
    let (n, t) = (window.nrows(), window.ncols());
    if n == 0 || t == 0 {
        return Err(Error::Data("empty return window".into()));
    }
    if !(0.0..=1.0).contains(&target_quantile) {
        return Err(Error::Config(format!(
            "target quantile must be in [0,1], got {target_quantile}"
        )));
    }
    if n == 1 {
        return Ok(Portfolio {
            weights: Array1::from_elem(1, 1.0),
        });
    }

    let mu = Array1::from_shape_fn(n, |i| window.row(i).sum() / t as f64);
    // pooled percentile with linear interpolation
    let mut pooled: Vec<f64> = window.iter().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let pos = target_quantile * (pooled.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    let mut q = pooled[lo] * (1.0 - frac) + pooled[hi] * frac;

    let mu_max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if q > mu_max {
        log::warn!(
            "min_variance_portfolio: return target {q:.6} infeasible, relaxing to max mean {mu_max:.6}"
        );
        q = mu_max;
    }

    // shrunk covariance: Σ ← 0.9·Σ̂ + 0.1·diag(Σ̂)
    let mut sigma = Array2::<f64>::zeros((n, n));
    let denom = if t > 1 { (t - 1) as f64 } else { 1.0 };
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..t {
                acc += (window[[i, k]] - mu[i]) * (window[[j, k]] - mu[j]);
            }
            let cov = acc / denom;
            sigma[[i, j]] = cov;
            sigma[[j, i]] = cov;
        }
    }
    let delta = 0.1;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sigma[[i, j]] *= 1.0 - delta;
            }
        }
    }

    // Lipschitz bound for 2Σ via row sums
    let lip = 2.0
        * (0..n)
            .map(|i| (0..n).map(|j| sigma[[i, j]].abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
            .max(1e-12);
    let step = 1.0 / lip;

    let mut w = Array1::from_elem(n, 1.0 / n as f64);
    w = project_feasible(&w, &mu, q)?;
    let max_iters = 200_000;
    for _ in 0..max_iters {
        let grad = sigma.dot(&w) * 2.0;
        let next = project_feasible(&(&w - &(step * &grad)), &mu, q)?;
        let delta_inf = w
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        w = next;
        if delta_inf <= 1e-12 {
            break;
        }
    }
    let p = Portfolio { weights: w };
    p.validate()?;
    Ok(p)
}

/// Euclidean projection onto {w: Σw = 1, w ≥ 0, μᵀw ≥ q} by Dykstra
/// alternation between the simplex and the halfspace.
fn project_feasible(v: &Array1<f64>, mu: &Array1<f64>, q: f64) -> Result<Array1<f64>> {
    let mut x = v.clone();
    let n = v.len();
    let mut p_inc = Array1::<f64>::zeros(n);
    let mut q_inc = Array1::<f64>::zeros(n);
    let mu_norm2 = mu.dot(mu);
    for _ in 0..10_000 {
        let y = project_simplex(&(&x + &p_inc));
        p_inc = &(&x + &p_inc) - &y;
        let z_arg = &y + &q_inc;
        let z = if mu_norm2 > 0.0 {
            let slack = q - mu.dot(&z_arg);
            if slack > 0.0 {
                &z_arg + &((slack / mu_norm2) * mu)
            } else {
                z_arg.clone()
            }
        } else {
            z_arg.clone()
        };
        q_inc = &z_arg - &z;
        let moved = x
            .iter()
            .zip(z.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        x = z;
        if moved <= 1e-14 {
            break;
        }
    }
    // final clean-up pass keeps the simplex constraints exact
    let w = project_simplex(&x);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("projection diverged".into()));
    }
    Ok(w)
}

/// Exact Euclidean projection onto the probability simplex.
fn project_simplex(v: &Array1<f64>) -> Array1<f64> {
    let n = v.len();
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &val) in sorted.iter().enumerate() {
        cum += val;
        let candidate = (cum - 1.0) / (k + 1) as f64;
        if val - candidate > 0.0 {
            theta = candidate;
        }
    }
    Array1::from_shape_fn(n, |i| (v[i] - theta).max(0.0))
}
