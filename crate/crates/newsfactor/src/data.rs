//! Dataset construction: log returns from prices, word-intensity z-scores
//! from article counts, day splits, and a seeded synthetic generator.
//!
//! Day indexing convention: prices cover days 0..=s (s+1 columns); returns
//! and aligned intensities cover days 1..=s, stored in columns 0..s with
//! column t−1 holding day t.

use chrono::NaiveDate;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::ops::Range;

use crate::admm::FactorModel;
use crate::error::{Error, Result};

/// Open/close prices per stock and day. Missing observations are stored as
/// NaN and excluded downstream through the returns mask.
#[derive(Debug, Clone)]
pub struct PriceSeries {
    tickers: Vec<String>,
    dates: Vec<String>,
    open: Array2<f64>,
    close: Array2<f64>,
}

impl PriceSeries {
    /// Build and validate: present prices must be strictly positive and both
    /// grids must be n×(number of dates).
    pub fn new(
        tickers: Vec<String>,
        dates: Vec<String>,
        open: Array2<f64>,
        close: Array2<f64>,
    ) -> Result<Self> {
        let n = tickers.len();
        let t = dates.len();
        if open.dim() != (n, t) || close.dim() != (n, t) {
            return Err(Error::Dimension(format!(
                "price grids must be {n}x{t}, got open {:?} close {:?}",
                open.dim(),
                close.dim()
            )));
        }
        for (i, ticker) in tickers.iter().enumerate() {
            for (k, date) in dates.iter().enumerate() {
                for (name, grid) in [("open", &open), ("close", &close)] {
                    let v = grid[[i, k]];
                    if v.is_nan() {
                        continue; // missing observation
                    }
                    if !v.is_finite() || v <= 0.0 {
                        return Err(Error::Data(format!(
                            "nonpositive {name} price {v} for {ticker} on {date}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            tickers,
            dates,
            open,
            close,
        })
    }

    pub fn n_stocks(&self) -> usize {
        self.tickers.len()
    }
    /// Number of price days (s+1 in the day-indexing convention).
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }
    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }
    pub fn dates(&self) -> &[String] {
        &self.dates
    }
    pub fn open(&self) -> &Array2<f64> {
        &self.open
    }
    pub fn close(&self) -> &Array2<f64> {
        &self.close
    }
    /// Both open and close observed for stock `i` on price day `k`.
    pub fn is_present(&self, i: usize, k: usize) -> bool {
        !self.open[[i, k]].is_nan() && !self.close[[i, k]].is_nan()
    }
}

/// Daily article counts per word.
#[derive(Debug, Clone)]
pub struct ArticleCounts {
    words: Vec<String>,
    dates: Vec<String>,
    counts: Array2<f64>,
}

impl ArticleCounts {
    pub fn new(words: Vec<String>, dates: Vec<String>, counts: Array2<f64>) -> Result<Self> {
        if counts.dim() != (words.len(), dates.len()) {
            return Err(Error::Dimension(format!(
                "count grid must be {}x{}, got {:?}",
                words.len(),
                dates.len(),
                counts.dim()
            )));
        }
        if counts.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Data("article counts must be finite and ≥ 0".into()));
        }
        Ok(Self {
            words,
            dates,
            counts,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
    pub fn dates(&self) -> &[String] {
        &self.dates
    }
    pub fn counts(&self) -> &Array2<f64> {
        &self.counts
    }
}

/// Log returns r_it = ln x_it − ln x_{i,t−1} for days 1..=s, with a
/// tradability mask (false where either price is missing). Masked entries
/// hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    tickers: Vec<String>,
    dates: Vec<String>,
    values: Array2<f64>,
    mask: Array2<bool>,
}

impl ReturnsMatrix {
    pub fn from_parts(
        tickers: Vec<String>,
        dates: Vec<String>,
        values: Array2<f64>,
        mask: Array2<bool>,
    ) -> Result<Self> {
        let (n, s) = (tickers.len(), dates.len());
        if values.dim() != (n, s) || mask.dim() != (n, s) {
            return Err(Error::Dimension(format!(
                "returns must be {n}x{s}, got values {:?} mask {:?}",
                values.dim(),
                mask.dim()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("returns contain NaN or infinity".into()));
        }
        Ok(Self {
            tickers,
            dates,
            values,
            mask,
        })
    }

    pub fn n_stocks(&self) -> usize {
        self.tickers.len()
    }
    /// Number of return days (s).
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }
    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }
    pub fn dates(&self) -> &[String] {
        &self.dates
    }
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }
}

/// Thresholded z-scores of word counts, elementwise ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WordIntensityMatrix {
    words: Vec<String>,
    dates: Vec<String>,
    values: Array2<f64>,
}

impl WordIntensityMatrix {
    pub fn from_parts(words: Vec<String>, dates: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (words.len(), dates.len()) {
            return Err(Error::Dimension(format!(
                "intensity must be {}x{}, got {:?}",
                words.len(),
                dates.len(),
                values.dim()
            )));
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Data(
                "word intensities must be finite and ≥ 0".into(),
            ));
        }
        Ok(Self {
            words,
            dates,
            values,
        })
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }
    pub fn words(&self) -> &[String] {
        &self.words
    }
    pub fn dates(&self) -> &[String] {
        &self.dates
    }
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Restrict to the given dates (exact match, in the given order).
    pub fn select_dates(&self, dates: &[String]) -> Result<WordIntensityMatrix> {
        let mut cols = Vec::with_capacity(dates.len());
        for d in dates {
            match self.dates.iter().position(|x| x == d) {
                Some(k) => cols.push(k),
                None => {
                    return Err(Error::Data(format!(
                        "no word intensities available for date {d}"
                    )))
                }
            }
        }
        let m = self.words.len();
        let mut values = Array2::<f64>::zeros((m, cols.len()));
        for (out_k, &k) in cols.iter().enumerate() {
            values.column_mut(out_k).assign(&self.values.column(k));
        }
        Ok(WordIntensityMatrix {
            words: self.words.clone(),
            dates: dates.to_vec(),
            values,
        })
    }
}

/// r_it = ln(close_it) − ln(close_{i,t−1}) for t = 1..=s. A stock-day is
/// masked out when either day's close is missing.
pub fn compute_log_returns(p: &PriceSeries) -> Result<ReturnsMatrix> {
    let n = p.n_stocks();
    let t = p.n_days();
    if t < 2 {
        return Err(Error::Data("need at least 2 price days for returns".into()));
    }
    let s = t - 1;
    let mut values = Array2::<f64>::zeros((n, s));
    let mut mask = Array2::<bool>::from_elem((n, s), false);
    for i in 0..n {
        for k in 1..t {
            let prev = p.close[[i, k - 1]];
            let cur = p.close[[i, k]];
            if prev.is_nan() || cur.is_nan() {
                continue;
            }
            values[[i, k - 1]] = cur.ln() - prev.ln();
            mask[[i, k - 1]] = true;
        }
    }
    ReturnsMatrix::from_parts(p.tickers.clone(), p.dates[1..].to_vec(), values, mask)
}

/// z-score each word count against the previous `window` days (sample
/// standard deviation, day t excluded), then keep z ≥ `z_threshold` and zero
/// the rest. Days with fewer than `window` predecessors or zero window
/// deviation emit 0.
pub fn compute_word_intensity(
    a: &ArticleCounts,
    window: usize,
    z_threshold: f64,
) -> Result<WordIntensityMatrix> {
    if window < 2 {
        return Err(Error::Config(format!(
            "z-score window must be ≥ 2, got {window}"
        )));
    }
    let m = a.words.len();
    let t = a.dates.len();
    let mut values = Array2::<f64>::zeros((m, t));
    for j in 0..m {
        for k in window..t {
            let slice: Vec<f64> = (k - window..k).map(|q| a.counts[[j, q]]).collect();
            let mean = slice.iter().sum::<f64>() / window as f64;
            let var = slice.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>()
                / (window as f64 - 1.0);
            if var == 0.0 {
                continue;
            }
            let z = (a.counts[[j, k]] - mean) / var.sqrt();
            if z >= z_threshold {
                values[[j, k]] = z;
            }
        }
    }
    WordIntensityMatrix::from_parts(a.words.clone(), a.dates.clone(), values)
}

/// Contiguous train/validation/test day ranges over 1..=s (half-open).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl Split {
    fn cols(r: &Range<usize>) -> Range<usize> {
        r.start - 1..r.end - 1
    }
    /// Column ranges into a returns/intensity matrix (day t ↔ column t−1).
    pub fn train_cols(&self) -> Range<usize> {
        Self::cols(&self.train)
    }
    pub fn val_cols(&self) -> Range<usize> {
        Self::cols(&self.val)
    }
    pub fn test_cols(&self) -> Range<usize> {
        Self::cols(&self.test)
    }
}

/// Partition days 1..=s at the two boundaries: train 1..=b1, validation
/// b1+1..=b2, test b2+1..=s.
pub fn make_split(s: usize, boundaries: (usize, usize)) -> Result<Split> {
    let (b1, b2) = boundaries;
    if b1 > b2 || b2 > s {
        return Err(Error::Config(format!(
            "split boundaries ({b1}, {b2}) must satisfy b1 ≤ b2 ≤ s = {s}"
        )));
    }
    Ok(Split {
        train: 1..b1 + 1,
        val: b1 + 1..b2 + 1,
        test: b2 + 1..s + 1,
    })
}

/// Parameters for [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticParams {
    pub n_stocks: usize,
    pub n_words: usize,
    pub n_days: usize,
    pub d: usize,
    /// Fraction of word columns of the true W forced to zero.
    pub sparsity: f64,
    /// Standard deviation of Gaussian noise added to the returns.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Draw a planted model (U* ≥ 0, column-sparse W*), sparse nonnegative
/// intensities Y, set R = U*W*Y + noise, and integrate prices
/// x_it = x_i0·exp(Σ r). Deterministic per seed; noise_sigma = 0 reproduces
/// R = U*W*Y exactly.
pub fn generate_synthetic(
    params: &SyntheticParams,
) -> Result<(PriceSeries, WordIntensityMatrix, FactorModel)> {
    let SyntheticParams {
        n_stocks: n,
        n_words: m,
        n_days: s,
        d,
        sparsity,
        noise_sigma,
        seed,
    } = *params;
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::Config(format!(
            "sparsity must be in [0,1], got {sparsity}"
        )));
    }
    if n == 0 || m == 0 || s == 0 || d == 0 {
        return Err(Error::Config("synthetic dimensions must be ≥ 1".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::Config(format!(
            "noise_sigma must be ≥ 0, got {noise_sigma}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u_true = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
    let mut w_true = Array2::from_shape_fn((d, m), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    // choose which columns go to zero: partial Fisher-Yates over word ids
    let zero_count = ((sparsity * m as f64).ceil() as usize).min(m);
    let mut ids: Vec<usize> = (0..m).collect();
    for k in 0..zero_count {
        let pick = k + rng.random_range(0..m - k);
        ids.swap(k, pick);
    }
    for &j in ids.iter().take(zero_count) {
        w_true.column_mut(j).fill(0.0);
    }

    let mut y = Array2::<f64>::zeros((m, s));
    for v in y.iter_mut() {
        if rng.random::<f64>() < 0.25 {
            let bump: f64 =
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            *v = 3.0 + bump.abs();
        }
    }

    // rescale W so returns land at a log-return-like magnitude
    let r0 = u_true.dot(&w_true.dot(&y));
    let mean = r0.iter().sum::<f64>() / r0.len() as f64;
    let std = (r0.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / r0.len() as f64).sqrt();
    let w_true = if std > 0.0 {
        w_true * (0.02 / std)
    } else {
        w_true
    };

    let mut r = u_true.dot(&w_true.dot(&y));
    if noise_sigma > 0.0 {
        for v in r.iter_mut() {
            let eps: f64 =
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            *v += noise_sigma * eps;
        }
    }

    let mut open = Array2::<f64>::zeros((n, s + 1));
    let mut close = Array2::<f64>::zeros((n, s + 1));
    for i in 0..n {
        let base = 20.0 + 80.0 * rng.random::<f64>();
        open[[i, 0]] = base;
        close[[i, 0]] = base;
        for t in 1..=s {
            let prev = close[[i, t - 1]];
            close[[i, t]] = prev * r[[i, t - 1]].exp();
            open[[i, t]] = prev;
        }
    }

    let start = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let dates: Vec<String> = (0..=s)
        .map(|t| {
            (start + chrono::Days::new(t as u64))
                .format("%Y-%m-%d")
                .to_string()
        })
        .collect();
    let tickers: Vec<String> = (0..n).map(|i| format!("S{i:03}")).collect();
    let words: Vec<String> = (0..m).map(|j| format!("word{j:03}")).collect();

    let prices = PriceSeries::new(tickers, dates.clone(), open, close)?;
    let intensity = WordIntensityMatrix::from_parts(words, dates[1..].to_vec(), y)?;
    let model = FactorModel {
        u: u_true,
        w: w_true,
    };
    Ok((prices, intensity, model))
}
