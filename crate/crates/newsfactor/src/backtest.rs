//! Daily trading simulation (signal strategy plus buy-and-hold and
//! constant-rebalancing executors) and the five evaluation metrics: return,
//! worst day, max drawdown, CVaR (5%), and Sharpe ratio vs a reference.

use ndarray::ArrayView2;
use std::ops::Range;

use crate::baselines::Portfolio;
use crate::data::PriceSeries;
use crate::error::{Error, Result};

/// Daily capital trace of one simulated strategy. Day t's open capital is
/// day t−1's close capital; the first day opens at 1.
#[derive(Debug, Clone)]
pub struct TradeLedger {
    pub dates: Vec<String>,
    pub open_capital: Vec<f64>,
    pub close_capital: Vec<f64>,
    /// Per day: (stock index, capital allocated at the open).
    pub allocations: Vec<Vec<(usize, f64)>>,
}

impl TradeLedger {
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }
    pub fn final_capital(&self) -> f64 {
        self.close_capital.last().copied().unwrap_or(1.0)
    }
    /// Capital series anchored at the initial capital: [1, close_1, ...].
    pub fn value_series(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_days() + 1);
        v.push(1.0);
        v.extend_from_slice(&self.close_capital);
        v
    }
    /// Simple daily returns of the capital series.
    pub fn daily_returns(&self) -> Vec<f64> {
        let v = self.value_series();
        v.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
    }

    fn check_continuity(&self) -> Result<()> {
        let mut prev = 1.0;
        for (t, (&o, &c)) in self
            .open_capital
            .iter()
            .zip(self.close_capital.iter())
            .enumerate()
        {
            if o != prev {
                return Err(Error::Data(format!(
                    "capital discontinuity at day {t}: opens at {o}, previous close {prev}"
                )));
            }
            prev = c;
        }
        Ok(())
    }
}

/// Buy every stock signalled "up" at the open with equal capital, sell all at
/// the close, hold cash overnight. Stocks with missing prices are skipped
/// with a warning and their capital reallocated among the remaining buys; no
/// buys means the day's capital is unchanged.
///
/// `signals` is n×len(days) aligned with `days` (price-day indices).
pub fn run_signal_strategy(
    signals: ArrayView2<'_, bool>,
    prices: &PriceSeries,
    days: Range<usize>,
) -> Result<TradeLedger> {
    let n = prices.n_stocks();
    if signals.nrows() != n || signals.ncols() != days.len() {
        return Err(Error::Dimension(format!(
            "signals must be {}x{}, got {:?}",
            n,
            days.len(),
            signals.dim()
        )));
    }
    if days.end > prices.n_days() {
        return Err(Error::Data(format!(
            "day range {days:?} exceeds {} price days",
            prices.n_days()
        )));
    }
    let mut ledger = TradeLedger {
        dates: Vec::new(),
        open_capital: Vec::new(),
        close_capital: Vec::new(),
        allocations: Vec::new(),
    };
    let mut capital = 1.0;
    for (col, k) in days.enumerate() {
        let mut buys: Vec<usize> = Vec::new();
        for i in 0..n {
            if !signals[[i, col]] {
                continue;
            }
            if !prices.is_present(i, k) {
                log::warn!(
                    "signal strategy: skipping {} on {}: missing price",
                    prices.tickers()[i],
                    prices.dates()[k]
                );
                continue;
            }
            buys.push(i);
        }
        let open_capital = capital;
        let mut allocations = Vec::with_capacity(buys.len());
        if !buys.is_empty() {
            let per_stock = capital / buys.len() as f64;
            let mut close_total = 0.0;
            for &i in &buys {
                allocations.push((i, per_stock));
                close_total += per_stock * prices.close()[[i, k]] / prices.open()[[i, k]];
            }
            capital = close_total;
        }
        ledger.dates.push(prices.dates()[k].clone());
        ledger.open_capital.push(open_capital);
        ledger.close_capital.push(capital);
        ledger.allocations.push(allocations);
    }
    ledger.check_continuity()?;
    Ok(ledger)
}

/// Buy once at the first day's open per the weights and mark the position to
/// each day's close. Stocks missing at the buy have their weight reallocated
/// (renormalized) among the present ones; a stock missing a later close is
/// marked at its last known price.
pub fn run_bah(portfolio: &Portfolio, prices: &PriceSeries, days: Range<usize>) -> Result<TradeLedger> {
    portfolio.validate()?;
    let n = prices.n_stocks();
    check_portfolio_days(portfolio, prices, &days)?;
    let first = days.start;

    // weights over stocks present at the buy
    let mut weights = portfolio.weights.clone();
    let present_mass: f64 = (0..n)
        .filter(|&i| prices.is_present(i, first))
        .map(|i| weights[i])
        .sum();
    let total_mass: f64 = weights.sum();
    if total_mass > 0.0 && present_mass == 0.0 {
        return Err(Error::Data(
            "no portfolio stock has prices on the first backtest day".into(),
        ));
    }
    if present_mass > 0.0 && (total_mass - present_mass).abs() > 0.0 {
        log::warn!("buy and hold: reallocating weight from stocks missing at the buy");
        for i in 0..n {
            weights[i] = if prices.is_present(i, first) {
                weights[i] / present_mass * total_mass
            } else {
                0.0
            };
        }
    }

    let mut ledger = TradeLedger {
        dates: Vec::new(),
        open_capital: Vec::new(),
        close_capital: Vec::new(),
        allocations: Vec::new(),
    };
    let mut last_price: Vec<f64> = (0..n).map(|i| prices.open()[[i, first]]).collect();
    let mut capital = 1.0;
    for k in days {
        let open_capital = capital;
        let mut value = 0.0;
        let mut allocations = Vec::new();
        for i in 0..n {
            if weights[i] == 0.0 {
                continue;
            }
            let close = prices.close()[[i, k]];
            let marked = if close.is_nan() { last_price[i] } else { close };
            if !close.is_nan() {
                last_price[i] = close;
            }
            // shares bought at day-one open: w_i / open_{i,first}
            value += weights[i] * marked / prices.open()[[i, first]];
            allocations.push((i, open_capital * weights[i] / total_mass.max(1.0)));
        }
        if weights.sum() == 0.0 {
            value = capital; // hold cash
        }
        capital = value;
        ledger.dates.push(prices.dates()[k].clone());
        ledger.open_capital.push(open_capital);
        ledger.close_capital.push(capital);
        ledger.allocations.push(allocations);
    }
    ledger.check_continuity()?;
    Ok(ledger)
}

/// Rebalance to the fixed weights every day: the daily capital multiplier is
/// Σ_i w_i·(close_i / prev_i), where prev is the previous close (the first
/// day uses its open). Missing stocks have their weight reallocated among
/// the present ones for that day.
pub fn run_cbal(portfolio: &Portfolio, prices: &PriceSeries, days: Range<usize>) -> Result<TradeLedger> {
    portfolio.validate()?;
    let n = prices.n_stocks();
    check_portfolio_days(portfolio, prices, &days)?;
    let first = days.start;

    let mut ledger = TradeLedger {
        dates: Vec::new(),
        open_capital: Vec::new(),
        close_capital: Vec::new(),
        allocations: Vec::new(),
    };
    let mut capital = 1.0;
    let mut prev_price: Vec<f64> = (0..n).map(|i| prices.open()[[i, first]]).collect();
    for k in days {
        let open_capital = capital;
        let mut mass = 0.0;
        let mut gain = 0.0;
        let mut allocations = Vec::new();
        for i in 0..n {
            let w = portfolio.weights[i];
            if w == 0.0 {
                continue;
            }
            let close = prices.close()[[i, k]];
            if close.is_nan() || prev_price[i].is_nan() {
                log::warn!(
                    "rebalancing: skipping {} on {}: missing price",
                    prices.tickers()[i],
                    prices.dates()[k]
                );
                continue;
            }
            mass += w;
            gain += w * close / prev_price[i];
            allocations.push((i, open_capital * w));
            prev_price[i] = close;
        }
        if mass > 0.0 {
            capital *= gain / mass;
        }
        ledger.dates.push(prices.dates()[k].clone());
        ledger.open_capital.push(open_capital);
        ledger.close_capital.push(capital);
        ledger.allocations.push(allocations);
    }
    ledger.check_continuity()?;
    Ok(ledger)
}

fn check_portfolio_days(portfolio: &Portfolio, prices: &PriceSeries, days: &Range<usize>) -> Result<()> {
    if portfolio.weights.len() != prices.n_stocks() {
        return Err(Error::Dimension(format!(
            "portfolio covers {} stocks, prices {}",
            portfolio.weights.len(),
            prices.n_stocks()
        )));
    }
    if days.is_empty() || days.end > prices.n_days() {
        return Err(Error::Data(format!(
            "day range {days:?} invalid for {} price days",
            prices.n_days()
        )));
    }
    Ok(())
}

/// min_t (V_t − V_{t−1}) / V_{t−1}
pub fn worst_day(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::UndefinedMetric(
            "worst day needs at least 2 values".into(),
        ));
    }
    Ok(values
        .windows(2)
        .map(|w| w[1] / w[0] - 1.0)
        .fold(f64::INFINITY, f64::min))
}

/// max_t (peak_{≤t} − V_t) / peak_{≤t} over the running peak.
pub fn max_drawdown(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("empty value series".into()));
    }
    let mut peak = values[0];
    let mut worst = 0.0f64;
    for &v in values {
        if v > peak {
            peak = v;
        }
        worst = worst.max((peak - v) / peak);
    }
    Ok(worst)
}

/// Mean of the lowest ⌈0.05·T⌉ daily returns.
pub fn cvar_5(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::UndefinedMetric("empty return series".into()));
    }
    let tail = ((0.05 * returns.len() as f64).ceil() as usize).max(1);
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[..tail].iter().sum::<f64>() / tail as f64)
}

/// mean(r_t − ref_t) / sample-stdev(r_t − ref_t). Zero variance (e.g. the
/// reference against itself) is an undefined-metric error.
pub fn sharpe_vs_reference(strategy: &[f64], reference: &[f64]) -> Result<f64> {
    if strategy.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "return series lengths differ: {} vs {}",
            strategy.len(),
            reference.len()
        )));
    }
    if strategy.len() < 2 {
        return Err(Error::UndefinedMetric(
            "sharpe needs at least 2 daily returns".into(),
        ));
    }
    let diffs: Vec<f64> = strategy
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| a - b)
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(Error::UndefinedMetric(
            "zero-variance excess returns (strategy equals reference up to a constant)".into(),
        ));
    }
    Ok(mean / var.sqrt())
}

/// The five metrics plus the underlying daily value series.
#[derive(Debug, Clone)]
pub struct BacktestReport {
    /// Final capital over initial capital.
    pub cumulative_return: f64,
    pub worst_day: f64,
    pub max_drawdown: f64,
    pub cvar_5: f64,
    /// None when the Sharpe denominator is zero (the reference row reports
    /// itself; rendered as a dash).
    pub sharpe: Option<f64>,
    pub dates: Vec<String>,
    pub values: Vec<f64>,
}

/// Assemble the report. `reference_returns`, when given, must align with the
/// ledger's days; a zero-variance excess leaves the Sharpe undefined (None)
/// rather than failing, so a reference can report on itself.
pub fn build_report(ledger: &TradeLedger, reference_returns: Option<&[f64]>) -> Result<BacktestReport> {
    if ledger.n_days() == 0 {
        return Err(Error::Data("empty ledger".into()));
    }
    let values = ledger.value_series();
    let returns = ledger.daily_returns();
    let sharpe = match reference_returns {
        Some(reference) => match sharpe_vs_reference(&returns, reference) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(BacktestReport {
        cumulative_return: ledger.final_capital(),
        worst_day: worst_day(&values)?,
        max_drawdown: max_drawdown(&values)?,
        cvar_5: cvar_5(&returns)?,
        sharpe,
        dates: ledger.dates.clone(),
        values,
    })
}
