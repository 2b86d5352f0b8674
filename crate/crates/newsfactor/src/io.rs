//! CSV persistence for pipeline artifacts: raw prices and article counts,
//! labeled matrices, factor models, predictions, backtest reports, and
//! atomic file writes.
//!
//! Floats are written with Rust's shortest round-trip formatting, so writing
//! and re-reading a matrix reproduces it bit for bit.

use ndarray::Array2;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::admm::FactorModel;
use crate::data::{ArticleCounts, PriceSeries, ReturnsMatrix, WordIntensityMatrix};
use crate::error::{Error, Result};

/// Write a file via a temporary sibling and an atomic rename, so a crash
/// never leaves a partially written artifact behind.
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("invalid output path {}", path.display())))?;
    let tmp = dir.join(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn validate_iso_date(s: &str) -> Result<()> {
    chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|_| ())
        .map_err(|_| Error::Data(format!("date {s:?} is not ISO-8601 (YYYY-MM-DD)")))
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: String,
    ticker: String,
    open: f64,
    close: f64,
}

/// Read a `date,ticker,open,close` CSV into a dense price grid; absent
/// stock-day rows become missing observations.
pub fn read_prices_csv(path: &Path) -> Result<PriceSeries> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut cells: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    for row in reader.deserialize::<PriceRow>() {
        let row = row?;
        validate_iso_date(&row.date)?;
        let key = (row.ticker.clone(), row.date.clone());
        if cells.insert(key, (row.open, row.close)).is_some() {
            return Err(Error::Data(format!(
                "duplicate price row for {} on {}",
                row.ticker, row.date
            )));
        }
    }
    if cells.is_empty() {
        return Err(Error::Data(format!(
            "no price rows in {}",
            path.display()
        )));
    }
    let tickers: Vec<String> = {
        let mut t: Vec<String> = cells.keys().map(|(tk, _)| tk.clone()).collect();
        t.dedup();
        t
    };
    let mut dates: Vec<String> = cells.keys().map(|(_, d)| d.clone()).collect();
    dates.sort();
    dates.dedup();

    let mut open = Array2::<f64>::from_elem((tickers.len(), dates.len()), f64::NAN);
    let mut close = open.clone();
    for (i, ticker) in tickers.iter().enumerate() {
        for (k, date) in dates.iter().enumerate() {
            if let Some(&(o, c)) = cells.get(&(ticker.clone(), date.clone())) {
                open[[i, k]] = o;
                close[[i, k]] = c;
            }
        }
    }
    PriceSeries::new(tickers, dates, open, close)
}

/// Render a price series back to the `date,ticker,open,close` schema,
/// skipping missing observations.
pub fn prices_to_csv(prices: &PriceSeries) -> String {
    let mut out = String::from("date,ticker,open,close\n");
    for (k, date) in prices.dates().iter().enumerate() {
        for (i, ticker) in prices.tickers().iter().enumerate() {
            if !prices.is_present(i, k) {
                continue;
            }
            out.push_str(&format!(
                "{date},{ticker},{},{}\n",
                prices.open()[[i, k]],
                prices.close()[[i, k]]
            ));
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct CountRow {
    date: String,
    word: String,
    doc_count: f64,
}

/// Read a `date,word,doc_count` CSV. Missing word-day cells count as zero; a
/// file with no data rows yields zero words.
pub fn read_counts_csv(path: &Path) -> Result<ArticleCounts> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut cells: BTreeMap<(String, String), f64> = BTreeMap::new();
    for row in reader.deserialize::<CountRow>() {
        let row = row?;
        validate_iso_date(&row.date)?;
        if cells.insert((row.word.clone(), row.date.clone()), row.doc_count).is_some() {
            return Err(Error::Data(format!(
                "duplicate count row for {:?} on {}",
                row.word, row.date
            )));
        }
    }
    let words: Vec<String> = {
        let mut w: Vec<String> = cells.keys().map(|(w, _)| w.clone()).collect();
        w.dedup();
        w
    };
    let mut dates: Vec<String> = cells.keys().map(|(_, d)| d.clone()).collect();
    dates.sort();
    dates.dedup();
    let mut counts = Array2::<f64>::zeros((words.len(), dates.len()));
    for (j, word) in words.iter().enumerate() {
        for (k, date) in dates.iter().enumerate() {
            if let Some(&c) = cells.get(&(word.clone(), date.clone())) {
                counts[[j, k]] = c;
            }
        }
    }
    ArticleCounts::new(words, dates, counts)
}

/// Write a labeled matrix: header `corner,<col labels...>`, one row label
/// plus values per line.
pub fn matrix_to_csv(
    corner: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &Array2<f64>,
) -> String {
    let mut out = String::new();
    out.push_str(corner);
    for c in col_labels {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (i, label) in row_labels.iter().enumerate() {
        out.push_str(label);
        for j in 0..values.ncols() {
            out.push(',');
            out.push_str(&values[[i, j]].to_string());
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`matrix_to_csv`].
pub fn matrix_from_csv(content: &str) -> Result<(String, Vec<String>, Vec<String>, Array2<f64>)> {
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty matrix CSV".into()))?;
    let mut header_cells = header.split(',');
    let corner = header_cells.next().unwrap_or("").to_string();
    let col_labels: Vec<String> = header_cells.map(str::to_string).collect();
    let mut row_labels = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        row_labels.push(cells.next().unwrap_or("").to_string());
        let mut count = 0usize;
        for cell in cells {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "line {}: cannot parse {cell:?} as a number",
                    lineno + 2
                ))
            })?;
            rows.push(v);
            count += 1;
        }
        if count != col_labels.len() {
            return Err(Error::Data(format!(
                "line {}: {count} values for {} columns",
                lineno + 2,
                col_labels.len()
            )));
        }
    }
    let values = Array2::from_shape_vec((row_labels.len(), col_labels.len()), rows)
        .map_err(|e| Error::Data(format!("matrix CSV shape error: {e}")))?;
    Ok((corner, row_labels, col_labels, values))
}

pub fn write_matrix_csv(
    path: &Path,
    corner: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &Array2<f64>,
) -> Result<()> {
    atomic_write(path, &matrix_to_csv(corner, row_labels, col_labels, values))
}

pub fn read_matrix_csv(path: &Path) -> Result<(String, Vec<String>, Vec<String>, Array2<f64>)> {
    matrix_from_csv(&fs::read_to_string(path)?)
}

/// Persist returns + mask + intensities as a prepared dataset directory.
pub fn save_dataset(dir: &Path, returns: &ReturnsMatrix, intensity: &WordIntensityMatrix) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(
        &dir.join("returns.csv"),
        "ticker",
        returns.tickers(),
        returns.dates(),
        returns.values(),
    )?;
    let mask_values = returns.mask().mapv(|b| if b { 1.0 } else { 0.0 });
    write_matrix_csv(
        &dir.join("mask.csv"),
        "ticker",
        returns.tickers(),
        returns.dates(),
        &mask_values,
    )?;
    write_matrix_csv(
        &dir.join("y.csv"),
        "word",
        intensity.words(),
        intensity.dates(),
        intensity.values(),
    )?;
    Ok(())
}

/// Load a prepared dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<(ReturnsMatrix, WordIntensityMatrix)> {
    let (_, tickers, dates, values) = read_matrix_csv(&dir.join("returns.csv"))?;
    let (_, mask_tickers, mask_dates, mask_values) = read_matrix_csv(&dir.join("mask.csv"))?;
    if mask_tickers != tickers || mask_dates != dates {
        return Err(Error::Data("mask.csv labels do not match returns.csv".into()));
    }
    let mut mask = Array2::<bool>::from_elem(mask_values.dim(), false);
    for (out, &v) in mask.iter_mut().zip(mask_values.iter()) {
        *out = match v {
            x if x == 0.0 => false,
            x if x == 1.0 => true,
            other => {
                return Err(Error::Data(format!(
                    "mask.csv entry {other} is neither 0 nor 1"
                )))
            }
        };
    }
    let returns = ReturnsMatrix::from_parts(tickers, dates.clone(), values, mask)?;
    let (_, words, y_dates, y_values) = read_matrix_csv(&dir.join("y.csv"))?;
    if y_dates != dates {
        return Err(Error::Data("y.csv dates do not match returns.csv".into()));
    }
    let intensity = WordIntensityMatrix::from_parts(words, y_dates, y_values)?;
    Ok((returns, intensity))
}

/// Solver provenance stored next to the factor matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub d: usize,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub seed: u64,
    /// Inclusive day range the model was fit on.
    pub train_start: usize,
    pub train_end: usize,
}

/// Write u.csv, w.csv and model.meta into `dir`.
pub fn save_model(
    dir: &Path,
    model: &FactorModel,
    tickers: &[String],
    words: &[String],
    meta: &ModelMeta,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let factor_labels: Vec<String> = (0..model.n_factors()).map(|k| format!("f{k}")).collect();
    write_matrix_csv(&dir.join("u.csv"), "ticker", tickers, &factor_labels, &model.u)?;
    write_matrix_csv(&dir.join("w.csv"), "factor", &factor_labels, words, &model.w)?;
    let meta_text = format!(
        "d={}\nlambda={}\nmu={}\nrho={}\nseed={}\ntrain_start={}\ntrain_end={}\n",
        meta.d, meta.lambda, meta.mu, meta.rho, meta.seed, meta.train_start, meta.train_end
    );
    atomic_write(&dir.join("model.meta"), &meta_text)?;
    Ok(())
}

/// Load a model directory written by [`save_model`].
pub fn load_model(dir: &Path) -> Result<(FactorModel, Vec<String>, Vec<String>, ModelMeta)> {
    let (_, tickers, _, u) = read_matrix_csv(&dir.join("u.csv"))?;
    let (_, _, words, w) = read_matrix_csv(&dir.join("w.csv"))?;
    if u.ncols() != w.nrows() {
        return Err(Error::Data(format!(
            "u.csv has {} factors but w.csv has {}",
            u.ncols(),
            w.nrows()
        )));
    }
    if u.iter().any(|&v| v < 0.0) {
        return Err(Error::Data("u.csv contains negative factor entries".into()));
    }
    let meta_text = fs::read_to_string(dir.join("model.meta"))?;
    let mut map = BTreeMap::new();
    for line in meta_text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Data(format!("model.meta line {line:?} is not key=value")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |key: &str| -> Result<&String> {
        map.get(key)
            .ok_or_else(|| Error::Data(format!("model.meta missing key {key}")))
    };
    let parse_f = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::Data(format!("model.meta key {key} is not a number")))
    };
    let parse_u = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::Data(format!("model.meta key {key} is not an integer")))
    };
    let meta = ModelMeta {
        d: parse_u("d")?,
        lambda: parse_f("lambda")?,
        mu: parse_f("mu")?,
        rho: parse_f("rho")?,
        seed: parse_u("seed")? as u64,
        train_start: parse_u("train_start")?,
        train_end: parse_u("train_end")?,
    };
    if meta.d != u.ncols() {
        return Err(Error::Data(format!(
            "model.meta d={} disagrees with u.csv ({} factors)",
            meta.d,
            u.ncols()
        )));
    }
    Ok((FactorModel { u, w }, tickers, words, meta))
}

/// One emitted prediction row.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub date: String,
    pub ticker: String,
    pub r_hat: f64,
    pub x_hat: f64,
    pub direction: String,
}

pub fn predictions_to_csv(rows: &[PredictionRow]) -> String {
    let mut out = String::from("date,ticker,r_hat,x_hat,direction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.date, r.ticker, r.r_hat, r.x_hat, r.direction
        ));
    }
    out
}

pub fn read_predictions_csv(path: &Path) -> Result<Vec<PredictionRow>> {
    #[derive(Deserialize)]
    struct Row {
        date: String,
        ticker: String,
        r_hat: f64,
        x_hat: f64,
        direction: String,
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row?;
        if row.direction != "up" && row.direction != "down" {
            return Err(Error::Data(format!(
                "direction {:?} must be up or down",
                row.direction
            )));
        }
        rows.push(PredictionRow {
            date: row.date,
            ticker: row.ticker,
            r_hat: row.r_hat,
            x_hat: row.x_hat,
            direction: row.direction,
        });
    }
    Ok(rows)
}

/// One strategy row of the backtest report (Sharpe empty when undefined).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub strategy: String,
    pub cumulative_return: f64,
    pub worst_day: f64,
    pub max_drawdown: f64,
    pub cvar_5: f64,
    pub sharpe: Option<f64>,
}

pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("strategy,return,worst_day,max_drawdown,cvar_5,sharpe\n");
    for r in rows {
        let sharpe = r.sharpe.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.strategy, r.cumulative_return, r.worst_day, r.max_drawdown, r.cvar_5, sharpe
        ));
    }
    out
}

pub fn report_from_csv(content: &str) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in content.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(Error::Data(format!(
                "report line {}: expected 6 cells, got {}",
                lineno + 1,
                cells.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Data(format!("report line {}: bad number {s:?}", lineno + 1)))
        };
        rows.push(ReportRow {
            strategy: cells[0].to_string(),
            cumulative_return: parse(cells[1])?,
            worst_day: parse(cells[2])?,
            max_drawdown: parse(cells[3])?,
            cvar_5: parse(cells[4])?,
            sharpe: if cells[5].is_empty() {
                None
            } else {
                Some(parse(cells[5])?)
            },
        });
    }
    Ok(rows)
}

/// `date,strategy,value` rows for plotting capital curves.
pub fn values_to_csv(rows: &[(String, String, f64)]) -> String {
    let mut out = String::from("date,strategy,value\n");
    for (date, strategy, value) in rows {
        out.push_str(&format!("{date},{strategy},{value}\n"));
    }
    out
}
