//! The pipeline commands. Each command computes every output in memory
//! first, then writes the files via atomic renames, so a failure leaves no
//! partial artifacts. An advisory `.lock` file guards each output directory
//! against concurrent invocations.

use ndarray::Array2;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use newsfactor::admm::{fit, SolverConfig};
use newsfactor::backtest::{
    build_report, cvar_5, max_drawdown, run_bah, run_cbal, run_signal_strategy, worst_day,
    BacktestReport, TradeLedger,
};
use newsfactor::baselines::{min_variance_portfolio, uniform_portfolio, Portfolio};
use newsfactor::data::{
    compute_log_returns, compute_word_intensity, generate_synthetic, make_split, Split,
    SyntheticParams, WordIntensityMatrix,
};
use newsfactor::io::{
    atomic_write, load_dataset, load_model, matrix_to_csv, predictions_to_csv, prices_to_csv,
    read_counts_csv, read_predictions_csv, read_prices_csv, report_to_csv, save_dataset,
    save_model, values_to_csv, ModelMeta, PredictionRow, ReportRow,
};
use newsfactor::predict::{correlation_distance_matrix, directional_accuracy, Direction};
use newsfactor::{Error, Result};

use crate::config::Settings;

/// Advisory lock on an output directory, removed on drop.
struct OutDirLock {
    path: PathBuf,
}

impl OutDirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output dir {} is locked by another invocation (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutDirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_all(outputs: Vec<(PathBuf, String)>) -> Result<()> {
    for (path, content) in outputs {
        atomic_write(&path, &content)?;
    }
    Ok(())
}

fn solver_config(s: &Settings) -> SolverConfig {
    SolverConfig {
        d: s.d,
        lambda: s.lambda,
        mu: s.mu,
        rho: s.rho,
        max_iters: s.max_iters,
        tol_primal: s.tol,
        seed: s.seed,
    }
}

fn resolve_split(s: &Settings, n_days: usize) -> Result<Split> {
    let boundaries = s.split.unwrap_or((n_days, n_days));
    make_split(n_days, boundaries)
}

/// Inclusive day range over 1..=s a command should act on: --days wins, then
/// the split's test segment, then every day.
fn resolve_days(s: &Settings, n_days: usize) -> Result<std::ops::Range<usize>> {
    if let Some((a, b)) = s.days {
        if a < 1 || a > b || b > n_days {
            return Err(Error::Config(format!(
                "--days {a},{b} out of range for {n_days} days"
            )));
        }
        return Ok(a..b + 1);
    }
    if s.split.is_some() {
        let split = resolve_split(s, n_days)?;
        if !split.test.is_empty() {
            return Ok(split.test);
        }
    }
    Ok(1..n_days + 1)
}

/// Generate a synthetic dataset: raw prices plus a prepared data dir and the
/// planted ground-truth factors.
pub fn cmd_synth(
    s: &Settings,
    n_stocks: usize,
    n_words: usize,
    n_days: usize,
    sparsity: f64,
    noise: f64,
) -> Result<()> {
    let out = s.require_out()?;
    let _lock = OutDirLock::acquire(&out)?;
    let (prices, intensity, truth) = generate_synthetic(&SyntheticParams {
        n_stocks,
        n_words,
        n_days,
        d: s.d,
        sparsity,
        noise_sigma: noise,
        seed: s.seed,
    })?;
    let returns = compute_log_returns(&prices)?;

    let factor_labels: Vec<String> = (0..s.d).map(|k| format!("f{k}")).collect();
    let outputs = vec![
        (out.join("prices.csv"), prices_to_csv(&prices)),
        (
            out.join("u_true.csv"),
            matrix_to_csv("ticker", returns.tickers(), &factor_labels, &truth.u),
        ),
        (
            out.join("w_true.csv"),
            matrix_to_csv("factor", &factor_labels, intensity.words(), &truth.w),
        ),
    ];
    write_all(outputs)?;
    save_dataset(&out, &returns, &intensity)?;
    log::info!(
        "synth: wrote {} stocks x {} days, {} words to {}",
        n_stocks,
        n_days,
        n_words,
        out.display()
    );
    Ok(())
}

/// Build the prepared dataset (returns, mask, intensities) from raw CSVs.
pub fn cmd_prepare(s: &Settings) -> Result<()> {
    let prices_path = Settings::require_path(&s.prices, "--prices")?;
    let counts_path = Settings::require_path(&s.counts, "--counts")?;
    let out = s.require_out()?;
    let _lock = OutDirLock::acquire(&out)?;

    let prices = read_prices_csv(&prices_path)?;
    let returns = compute_log_returns(&prices)?;
    let counts = read_counts_csv(&counts_path)?;
    let intensity = if counts.words().is_empty() {
        log::warn!("prepare: counts file has no rows; intensities are empty");
        WordIntensityMatrix::from_parts(
            Vec::new(),
            returns.dates().to_vec(),
            Array2::zeros((0, returns.n_days())),
        )?
    } else {
        let full = compute_word_intensity(&counts, s.window, s.z_threshold)?;
        full.select_dates(returns.dates())?
    };
    save_dataset(&out, &returns, &intensity)?;
    Ok(())
}

/// Fit the factor model on the training segment and persist it.
pub fn cmd_train(s: &Settings) -> Result<()> {
    let data_dir = Settings::require_path(&s.data, "--data")?;
    let out = s.require_out()?;
    let _lock = OutDirLock::acquire(&out)?;

    let (returns, intensity) = load_dataset(&data_dir)?;
    let n_days = returns.n_days();
    let split = resolve_split(s, n_days)?;
    let train_cols = split.train_cols();
    if train_cols.is_empty() {
        return Err(Error::Config("training range is empty".into()));
    }
    let r_train = returns
        .values()
        .slice(ndarray::s![.., train_cols.clone()])
        .to_owned();
    let y_train = intensity
        .values()
        .slice(ndarray::s![.., train_cols.clone()])
        .to_owned();

    let cfg = solver_config(s);
    let (model, state) = fit(r_train.view(), y_train.view(), &cfg)?;

    let meta = ModelMeta {
        d: cfg.d,
        lambda: cfg.lambda,
        mu: cfg.mu,
        rho: cfg.rho,
        seed: cfg.seed,
        train_start: split.train.start,
        train_end: split.train.end - 1,
    };
    save_model(&out, &model, returns.tickers(), intensity.words(), &meta)?;

    let mut history = String::from("iter,objective,residual_u,residual_w\n");
    for rec in &state.history {
        history.push_str(&format!(
            "{},{},{},{}\n",
            rec.iter, rec.objective, rec.residual_u, rec.residual_w
        ));
    }
    atomic_write(&out.join("history.csv"), &history)?;
    log::info!(
        "train: {} iterations, final objective {:.6e}",
        state.iter,
        state.history.last().map(|r| r.objective).unwrap_or(f64::NAN)
    );
    Ok(())
}

/// Emit per-day predictions using only day-t intensities and day t−1 closes.
pub fn cmd_predict(s: &Settings) -> Result<()> {
    let data_dir = Settings::require_path(&s.data, "--data")?;
    let model_dir = Settings::require_path(&s.model, "--model")?;
    let prices_path = Settings::require_path(&s.prices, "--prices")?;
    let out = s.require_out()?;
    let _lock = OutDirLock::acquire(&out)?;

    let (returns, intensity) = load_dataset(&data_dir)?;
    let (model, model_tickers, model_words, _meta) = load_model(&model_dir)?;
    let prices = read_prices_csv(&prices_path)?;

    if model_tickers != returns.tickers() {
        return Err(Error::Data("model tickers do not match the dataset".into()));
    }
    if model_words != intensity.words() {
        return Err(Error::Data("model words do not match the dataset".into()));
    }
    let price_row: BTreeMap<&String, usize> = prices
        .tickers()
        .iter()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();

    let days = resolve_days(s, returns.n_days())?;
    let mut rows: Vec<PredictionRow> = Vec::new();
    for t in days {
        let date = &returns.dates()[t - 1];
        let y_t = intensity.values().column(t - 1);
        let r_hat = model.u.dot(&model.w.dot(&y_t));
        let price_day = prices
            .dates()
            .iter()
            .position(|d| d == date)
            .ok_or_else(|| Error::Data(format!("no prices for date {date}")))?;
        if price_day == 0 {
            return Err(Error::Data(format!(
                "date {date} has no previous trading day in the price file"
            )));
        }
        for (i, ticker) in returns.tickers().iter().enumerate() {
            let pi = *price_row
                .get(ticker)
                .ok_or_else(|| Error::Data(format!("ticker {ticker} missing from prices")))?;
            let prev_close = prices.close()[[pi, price_day - 1]];
            if prev_close.is_nan() {
                continue; // not tradable: no reference price
            }
            let direction = Direction::from_return(r_hat[i]);
            rows.push(PredictionRow {
                date: date.clone(),
                ticker: ticker.clone(),
                r_hat: r_hat[i],
                x_hat: prev_close * r_hat[i].exp(),
                direction: direction.as_str().to_string(),
            });
        }
    }
    write_all(vec![(out.join("predictions.csv"), predictions_to_csv(&rows))])
}

#[derive(Debug, Deserialize)]
struct ReferenceRow {
    date: String,
    close: f64,
}

/// Reference index closes keyed by date.
fn read_reference_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut map = BTreeMap::new();
    for row in reader.deserialize::<ReferenceRow>() {
        let row = row?;
        if row.close <= 0.0 || !row.close.is_finite() {
            return Err(Error::Data(format!(
                "reference close {} on {} must be positive",
                row.close, row.date
            )));
        }
        if map.insert(row.date.clone(), row.close).is_some() {
            return Err(Error::Data(format!(
                "duplicate reference row for {}",
                row.date
            )));
        }
    }
    if map.len() < 2 {
        return Err(Error::Data("reference series needs at least 2 days".into()));
    }
    Ok(map)
}

fn ledger_rows(name: &str, ledger: &TradeLedger) -> Vec<(String, String, f64)> {
    ledger
        .dates
        .iter()
        .zip(ledger.close_capital.iter())
        .map(|(d, v)| (d.clone(), name.to_string(), *v))
        .collect()
}

fn report_row(name: &str, report: &BacktestReport) -> ReportRow {
    ReportRow {
        strategy: name.to_string(),
        cumulative_return: report.cumulative_return,
        worst_day: report.worst_day,
        max_drawdown: report.max_drawdown,
        cvar_5: report.cvar_5,
        sharpe: report.sharpe,
    }
}

/// Run the signal strategy plus the enabled baselines and emit the report
/// and daily value curves.
pub fn cmd_backtest(s: &Settings) -> Result<()> {
    let predictions_path = Settings::require_path(&s.predictions, "--predictions")?;
    let prices_path = Settings::require_path(&s.prices, "--prices")?;
    let data_dir = Settings::require_path(&s.data, "--data")?;
    let out = s.require_out()?;
    let _lock = OutDirLock::acquire(&out)?;

    let prices = read_prices_csv(&prices_path)?;
    let (returns, _) = load_dataset(&data_dir)?;
    let predictions = read_predictions_csv(&predictions_path)?;
    if predictions.is_empty() {
        return Err(Error::Data("predictions file has no rows".into()));
    }

    // group prediction rows by date, in date order
    let mut by_date: BTreeMap<String, Vec<(usize, bool)>> = BTreeMap::new();
    let price_row: BTreeMap<&String, usize> = prices
        .tickers()
        .iter()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    for row in &predictions {
        let i = *price_row
            .get(&row.ticker)
            .ok_or_else(|| Error::Data(format!("ticker {} missing from prices", row.ticker)))?;
        by_date
            .entry(row.date.clone())
            .or_default()
            .push((i, row.direction == "up"));
    }

    // the prediction dates must form a contiguous run of price days
    let day_indices: Vec<usize> = by_date
        .keys()
        .map(|d| {
            prices
                .dates()
                .iter()
                .position(|x| x == d)
                .ok_or_else(|| Error::Data(format!("prediction date {d} not in prices")))
        })
        .collect::<Result<_>>()?;
    let k0 = day_indices[0];
    let k1 = *day_indices.last().unwrap();
    if day_indices.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Data(
            "prediction dates are not a contiguous run of price days".into(),
        ));
    }
    let range = k0..k1 + 1;

    let n = prices.n_stocks();
    let mut signals = Array2::<bool>::from_elem((n, range.len()), false);
    for (col, (_, day_rows)) in by_date.iter().enumerate() {
        for &(i, up) in day_rows {
            signals[[i, col]] = up;
        }
    }

    // optional reference series aligned to the backtest dates; the day
    // before the range anchors its first return
    let reference = match &s.reference {
        Some(path) => {
            let closes = read_reference_csv(path)?;
            if k0 == 0 {
                return Err(Error::Data(
                    "backtest range starts on the first price day; the reference has no prior close".into(),
                ));
            }
            let anchor_date = &prices.dates()[k0 - 1];
            let mut prev = *closes.get(anchor_date).ok_or_else(|| {
                Error::Data(format!("reference series missing anchor date {anchor_date}"))
            })?;
            let mut rel = Vec::with_capacity(range.len());
            let mut returns_series = Vec::with_capacity(range.len());
            for k in range.clone() {
                let date = &prices.dates()[k];
                let close = *closes.get(date).ok_or_else(|| {
                    Error::Data(format!("reference series missing date {date}"))
                })?;
                returns_series.push(close / prev - 1.0);
                rel.push(close);
                prev = close;
            }
            Some((returns_series, rel))
        }
        None => None,
    };
    let ref_returns = reference.as_ref().map(|(r, _)| r.as_slice());

    let mut reports: Vec<ReportRow> = Vec::new();
    let mut value_rows: Vec<(String, String, f64)> = Vec::new();

    let ours = run_signal_strategy(signals.view(), &prices, range.clone())?;
    let ours_report = build_report(&ours, ref_returns)?;
    reports.push(report_row("ours", &ours_report));
    value_rows.extend(ledger_rows("ours", &ours));

    // baselines need the training window: all return days strictly before the
    // first backtest day. Price day k0 is return day k0 (column k0−1).
    let mvp_needed = s.baselines.iter().any(|b| b.starts_with("mvp"));
    let mvp_portfolio: Option<Portfolio> = if mvp_needed {
        let end_col = k0.saturating_sub(1);
        if end_col == 0 {
            return Err(Error::Data(
                "no history before the backtest range to build the MVP".into(),
            ));
        }
        let window = returns.values().slice(ndarray::s![.., ..end_col]).to_owned();
        Some(min_variance_portfolio(window.view(), 0.95)?)
    } else {
        None
    };

    for name in &s.baselines {
        let (portfolio, style) = match name.as_str() {
            "u-bah" => (uniform_portfolio(n)?, "bah"),
            "u-cbal" => (uniform_portfolio(n)?, "cbal"),
            "mvp-bah" => (mvp_portfolio.clone().expect("mvp computed"), "bah"),
            "mvp-cbal" => (mvp_portfolio.clone().expect("mvp computed"), "cbal"),
            other => {
                return Err(Error::Config(format!(
                    "unknown baseline {other:?} (expected u-bah, u-cbal, mvp-bah, mvp-cbal)"
                )))
            }
        };
        let ledger = match style {
            "bah" => run_bah(&portfolio, &prices, range.clone())?,
            _ => run_cbal(&portfolio, &prices, range.clone())?,
        };
        let report = build_report(&ledger, ref_returns)?;
        reports.push(report_row(name, &report));
        value_rows.extend(ledger_rows(name, &ledger));
    }

    if let Some((ref_rets, ref_closes)) = &reference {
        // report the reference on itself: metrics from its value curve,
        // Sharpe undefined (the dash)
        let anchor = ref_closes[0] / (1.0 + ref_rets[0]);
        let mut values = vec![1.0];
        values.extend(ref_closes.iter().map(|c| c / anchor));
        reports.push(ReportRow {
            strategy: "reference".into(),
            cumulative_return: *values.last().unwrap(),
            worst_day: worst_day(&values)?,
            max_drawdown: max_drawdown(&values)?,
            cvar_5: cvar_5(ref_rets)?,
            sharpe: None,
        });
        for (k, v) in range.clone().zip(values[1..].iter()) {
            value_rows.push((prices.dates()[k].clone(), "reference".into(), *v));
        }
    }

    write_all(vec![
        (out.join("report.csv"), report_to_csv(&reports)),
        (out.join("values.csv"), values_to_csv(&value_rows)),
    ])
}

/// Emit plot-ready CSVs: the W heatmap, the U adjacency matrix, per-stock
/// accuracy vs mention counts, and cumulative-return curves.
pub fn cmd_report(s: &Settings) -> Result<()> {
    let model_dir = Settings::require_path(&s.model, "--model")?;
    let data_dir = Settings::require_path(&s.data, "--data")?;
    let backtest_dir = Settings::require_path(&s.backtest_dir, "--backtest")?;
    let out = s.require_out()?;
    let _lock = OutDirLock::acquire(&out)?;

    let (model, tickers, words, _meta) = load_model(&model_dir)?;
    let (returns, intensity) = load_dataset(&data_dir)?;
    if tickers != returns.tickers() {
        return Err(Error::Data("model tickers do not match the dataset".into()));
    }

    let factor_labels: Vec<String> = (0..model.n_factors()).map(|k| format!("f{k}")).collect();
    let heatmap = matrix_to_csv("factor", &factor_labels, &words, &model.w);

    let adjacency = correlation_distance_matrix(&model);
    let adjacency_csv = matrix_to_csv("ticker", &tickers, &tickers, &adjacency);

    // per-stock directional accuracy over the evaluation days
    let days = resolve_days(s, returns.n_days())?;
    let cols = days.start - 1..days.end - 1;
    let r_hat_all = model
        .u
        .dot(&model.w.dot(&intensity.values().slice(ndarray::s![.., cols.clone()])));
    let actual = returns.values().slice(ndarray::s![.., cols.clone()]).to_owned();
    let mask = returns.mask().slice(ndarray::s![.., cols.clone()]).to_owned();

    // ticker mention counts from the counts file, when given
    let mentions: BTreeMap<String, f64> = match &s.counts {
        Some(path) => {
            let counts = read_counts_csv(path)?;
            let mut map = BTreeMap::new();
            for (j, word) in counts.words().iter().enumerate() {
                map.insert(word.to_lowercase(), counts.counts().row(j).sum());
            }
            map
        }
        None => BTreeMap::new(),
    };

    let mut accuracy_csv = String::from("ticker,accuracy,mentions\n");
    for (i, ticker) in tickers.iter().enumerate() {
        let pred_row = r_hat_all.row(i).insert_axis(ndarray::Axis(0)).to_owned();
        let act_row = actual.row(i).insert_axis(ndarray::Axis(0)).to_owned();
        let mask_row = mask.row(i).insert_axis(ndarray::Axis(0)).to_owned();
        let acc = directional_accuracy(pred_row.view(), act_row.view(), &mask_row)
            .map(|a| a.to_string())
            .unwrap_or_default();
        let m = mentions.get(&ticker.to_lowercase()).copied().unwrap_or(0.0);
        accuracy_csv.push_str(&format!("{ticker},{acc},{m}\n"));
    }

    // cumulative return curves straight from the backtest values
    let curves = fs::read_to_string(backtest_dir.join("values.csv"))?;

    write_all(vec![
        (out.join("w_heatmap.csv"), heatmap),
        (out.join("u_adjacency.csv"), adjacency_csv),
        (out.join("accuracy_by_stock.csv"), accuracy_csv),
        (out.join("cumulative_returns.csv"), curves),
    ])
}
