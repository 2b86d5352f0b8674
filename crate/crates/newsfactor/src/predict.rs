//! Model-based return/price/direction prediction, directional-accuracy
//! scoring, and factor-space stock similarity.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::admm::FactorModel;
use crate::error::{Error, Result};

/// Up/down call for a stock-day. `r̂ = 0` maps to Down (don't buy).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn from_return(r_hat: f64) -> Self {
        if r_hat > 0.0 {
            Direction::Up
        } else {
            Direction::Down
        }
    }
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// One day's predictions across all stocks.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Day index t (1-based over the return days).
    pub day: usize,
    pub r_hat: Array1<f64>,
    /// x̂_it = x_{i,t−1}·exp(r̂_it); NaN where the previous close is missing.
    pub x_hat: Array1<f64>,
    pub direction: Vec<Direction>,
}

/// r̂ = U·(W·y_t) for one day's word-intensity column.
pub fn predict_returns(model: &FactorModel, y_t: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if y_t.len() != model.n_words() {
        return Err(Error::Dimension(format!(
            "intensity vector has {} words, model expects {}",
            y_t.len(),
            model.n_words()
        )));
    }
    if y_t.iter().any(|&v| v < 0.0) {
        return Err(Error::Data("word intensities must be ≥ 0".into()));
    }
    Ok(model.u.dot(&model.w.dot(&y_t)))
}

/// Assemble a [`Prediction`] from predicted returns and the previous day's
/// closes.
pub fn make_prediction(day: usize, r_hat: Array1<f64>, prev_close: ArrayView1<'_, f64>) -> Result<Prediction> {
    if prev_close.len() != r_hat.len() {
        return Err(Error::Dimension(format!(
            "{} predicted returns vs {} previous closes",
            r_hat.len(),
            prev_close.len()
        )));
    }
    let x_hat = Array1::from_shape_fn(r_hat.len(), |i| prev_close[i] * r_hat[i].exp());
    let direction = r_hat.iter().map(|&r| Direction::from_return(r)).collect();
    Ok(Prediction {
        day,
        r_hat,
        x_hat,
        direction,
    })
}

/// Fraction of tradable stock-days whose predicted direction matches the
/// actual one. Predicted r̂ = 0 counts as Down; actual zero returns are
/// excluded from the denominator (neither label is correct for a flat day).
pub fn directional_accuracy(
    predicted: ArrayView2<'_, f64>,
    actual: ArrayView2<'_, f64>,
    mask: &Array2<bool>,
) -> Result<f64> {
    if predicted.dim() != actual.dim() || mask.dim() != actual.dim() {
        return Err(Error::Dimension(format!(
            "shape mismatch: predicted {:?}, actual {:?}, mask {:?}",
            predicted.dim(),
            actual.dim(),
            mask.dim()
        )));
    }
    let mut total = 0usize;
    let mut agree = 0usize;
    for ((p, a), &ok) in predicted.iter().zip(actual.iter()).zip(mask.iter()) {
        if !ok || *a == 0.0 {
            continue;
        }
        total += 1;
        if (*p > 0.0) == (*a > 0.0) {
            agree += 1;
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "no tradable stock-days with nonzero actual returns".into(),
        ));
    }
    Ok(agree as f64 / total as f64)
}

/// The k nearest stocks to `target` by correlation distance between rows of
/// U (1 − Pearson correlation of factor vectors). Rows with zero variance
/// are excluded with a warning; ties break on the lower stock id.
pub fn closest_stocks(model: &FactorModel, target: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let n = model.n_stocks();
    if target >= n {
        return Err(Error::Dimension(format!(
            "target stock {target} out of range (n = {n})"
        )));
    }
    if k >= n {
        return Err(Error::Dimension(format!(
            "k = {k} must be smaller than the number of stocks {n}"
        )));
    }
    let target_row = model.u.row(target);
    if row_variance(target_row) == 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "target stock {target} has a zero-variance factor row"
        )));
    }
    let mut dists: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        if i == target {
            continue;
        }
        let row = model.u.row(i);
        if row_variance(row) == 0.0 {
            log::warn!("closest_stocks: excluding stock {i} with zero-variance factor row");
            continue;
        }
        let corr = pearson(target_row, row);
        dists.push((i, 1.0 - corr));
    }
    dists.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    dists.truncate(k);
    Ok(dists)
}

fn row_variance(v: ArrayView1<'_, f64>) -> f64 {
    let mean = v.sum() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64
}

fn pearson(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Full correlation-distance matrix between rows of U (diagonal 0); entries
/// for zero-variance rows are NaN.
pub fn correlation_distance_matrix(model: &FactorModel) -> Array2<f64> {
    let n = model.n_stocks();
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (ri, rj) = (model.u.row(i), model.u.row(j));
            out[[i, j]] = if row_variance(ri) == 0.0 || row_variance(rj) == 0.0 {
                f64::NAN
            } else {
                1.0 - pearson(ri, rj)
            };
        }
    }
    out
}
