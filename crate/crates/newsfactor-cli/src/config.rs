//! Run configuration: defaults, overridden by a flat key=value config file,
//! overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use newsfactor::{Error, Result};

/// Everything a command might need. Path fields stay optional; each command
/// demands the ones it uses.
#[derive(Debug, Clone)]
pub struct Settings {
    pub prices: Option<PathBuf>,
    pub counts: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub backtest_dir: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub seed: u64,
    pub d: usize,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub window: usize,
    pub z_threshold: f64,
    pub split: Option<(usize, usize)>,
    pub days: Option<(usize, usize)>,
    pub baselines: Vec<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            prices: None,
            counts: None,
            data: None,
            model: None,
            predictions: None,
            backtest_dir: None,
            reference: None,
            out: None,
            seed: 0,
            d: 10,
            lambda: 0.1,
            mu: 0.01,
            rho: 1.0,
            max_iters: 500,
            tol: 1e-4,
            window: 60,
            z_threshold: 3.0,
            split: None,
            days: None,
            baselines: vec![
                "u-bah".into(),
                "u-cbal".into(),
                "mvp-bah".into(),
                "mvp-cbal".into(),
            ],
        }
    }
}

pub fn parse_pair(text: &str, what: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!(
            "{what} must be two comma-separated day indices, got {text:?}"
        )));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{what}: {:?} is not an integer", parts[0])))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{what}: {:?} is not an integer", parts[1])))?;
    Ok((a, b))
}

impl Settings {
    /// Apply one key=value pair from the config file.
    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_f = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Config(format!("config key {key}: {v:?} is not a number")))
        };
        let parse_u = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("config key {key}: {v:?} is not an integer")))
        };
        match key {
            "prices" => self.prices = Some(PathBuf::from(value)),
            "counts" => self.counts = Some(PathBuf::from(value)),
            "data" => self.data = Some(PathBuf::from(value)),
            "model" => self.model = Some(PathBuf::from(value)),
            "predictions" => self.predictions = Some(PathBuf::from(value)),
            "backtest" => self.backtest_dir = Some(PathBuf::from(value)),
            "reference" => self.reference = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = parse_u(value)? as u64,
            "d" => self.d = parse_u(value)?,
            "lambda" => self.lambda = parse_f(value)?,
            "mu" => self.mu = parse_f(value)?,
            "rho" => self.rho = parse_f(value)?,
            "max_iters" => self.max_iters = parse_u(value)?,
            "tol" => self.tol = parse_f(value)?,
            "window" => self.window = parse_u(value)?,
            "z_threshold" => self.z_threshold = parse_f(value)?,
            "split" => self.split = Some(parse_pair(value, "split")?),
            "days" => self.days = Some(parse_pair(value, "days")?),
            "baselines" => {
                self.baselines = value
                    .split(|c| c == ',' || c == ' ')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            other => {
                return Err(Error::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Load a flat key=value file ('#' starts a comment).
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "config line {}: expected key=value, got {raw:?}",
                    lineno + 1
                ))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn require_path(opt: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
        let p = opt
            .clone()
            .ok_or_else(|| Error::Config(format!("missing required path: {what}")))?;
        if !p.exists() {
            return Err(Error::Config(format!(
                "{what} path does not exist: {}",
                p.display()
            )));
        }
        Ok(p)
    }

    pub fn require_out(&self) -> Result<PathBuf> {
        self.out
            .clone()
            .ok_or_else(|| Error::Config("missing required path: --out".into()))
    }
}
