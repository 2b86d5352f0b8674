//! Command-line driver for the news-to-returns factor pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::{parse_pair, Settings};
use newsfactor::Error;

#[derive(Debug, Parser)]
#[command(
    name = "newsfactor",
    version,
    about = "Learn a shared latent-factor model linking daily news word intensities to stock returns, and backtest it"
)]
struct Cli {
    /// Flat key=value config file; command-line flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed for initialization and synthetic data
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Latent factor count
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Group-lasso weight (column sparsity of W)
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Elementwise lasso weight
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// ADMM penalty parameter
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Iteration cap for the solver
    #[arg(long = "max-iters", global = true)]
    max_iters: Option<usize>,
    /// Relative primal-residual tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Trailing window (days) for word-count z-scores
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Keep word z-scores at or above this value
    #[arg(long = "z-threshold", global = true)]
    z_threshold: Option<f64>,
    /// Train/validation/test day boundaries "A,B" over days 1..=s
    #[arg(long, global = true)]
    split: Option<String>,
    /// Inclusive day range "A,B" a command should act on
    #[arg(long, global = true)]
    days: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (prices, intensities, planted factors)
    Synth {
        #[arg(long, default_value_t = 20)]
        stocks: usize,
        #[arg(long, default_value_t = 30)]
        words: usize,
        #[arg(long = "n-days", default_value_t = 60)]
        n_days: usize,
        /// Fraction of W columns forced to zero
        #[arg(long, default_value_t = 0.8)]
        sparsity: f64,
        /// Return noise standard deviation
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Build returns/mask/intensity matrices from raw price and count CSVs
    Prepare {
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Fit the factor model on the training segment
    Train {
        /// Prepared dataset directory
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Emit per-day return/price/direction predictions
    Predict {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        prices: Option<PathBuf>,
    },
    /// Simulate the trading strategy and baselines, emit the metric report
    Backtest {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Reference index CSV (date,close) for the Sharpe column
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Comma-separated baseline list (u-bah,u-cbal,mvp-bah,mvp-cbal)
        #[arg(long)]
        baselines: Option<String>,
    },
    /// Emit plot-ready CSVs (W heatmap, U adjacency, accuracy, curves)
    Report {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        backtest: Option<PathBuf>,
        /// Raw counts CSV for per-stock mention totals
        #[arg(long)]
        counts: Option<PathBuf>,
    },
}

fn build_settings(cli: &Cli) -> newsfactor::Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        s.load_file(path)?;
    }
    if let Some(v) = cli.seed {
        s.seed = v;
    }
    if let Some(v) = cli.d {
        s.d = v;
    }
    if let Some(v) = cli.lambda {
        s.lambda = v;
    }
    if let Some(v) = cli.mu {
        s.mu = v;
    }
    if let Some(v) = cli.rho {
        s.rho = v;
    }
    if let Some(v) = cli.max_iters {
        s.max_iters = v;
    }
    if let Some(v) = cli.tol {
        s.tol = v;
    }
    if let Some(v) = cli.window {
        s.window = v;
    }
    if let Some(v) = cli.z_threshold {
        s.z_threshold = v;
    }
    if let Some(v) = &cli.split {
        s.split = Some(parse_pair(v, "--split")?);
    }
    if let Some(v) = &cli.days {
        s.days = Some(parse_pair(v, "--days")?);
    }
    if let Some(v) = &cli.out {
        s.out = Some(v.clone());
    }

    match &cli.command {
        Command::Prepare { prices, counts } => {
            if let Some(p) = prices {
                s.prices = Some(p.clone());
            }
            if let Some(p) = counts {
                s.counts = Some(p.clone());
            }
        }
        Command::Train { data } => {
            if let Some(p) = data {
                s.data = Some(p.clone());
            }
        }
        Command::Predict {
            data,
            model,
            prices,
        } => {
            if let Some(p) = data {
                s.data = Some(p.clone());
            }
            if let Some(p) = model {
                s.model = Some(p.clone());
            }
            if let Some(p) = prices {
                s.prices = Some(p.clone());
            }
        }
        Command::Backtest {
            predictions,
            prices,
            data,
            reference,
            baselines,
        } => {
            if let Some(p) = predictions {
                s.predictions = Some(p.clone());
            }
            if let Some(p) = prices {
                s.prices = Some(p.clone());
            }
            if let Some(p) = data {
                s.data = Some(p.clone());
            }
            if let Some(p) = reference {
                s.reference = Some(p.clone());
            }
            if let Some(list) = baselines {
                s.baselines = list
                    .split(',')
                    .filter(|x| !x.is_empty())
                    .map(str::to_string)
                    .collect();
            }
        }
        Command::Report {
            model,
            data,
            backtest,
            counts,
        } => {
            if let Some(p) = model {
                s.model = Some(p.clone());
            }
            if let Some(p) = data {
                s.data = Some(p.clone());
            }
            if let Some(p) = backtest {
                s.backtest_dir = Some(p.clone());
            }
            if let Some(p) = counts {
                s.counts = Some(p.clone());
            }
        }
        Command::Synth { .. } => {}
    }
    Ok(s)
}

fn run(cli: &Cli) -> newsfactor::Result<()> {
    let settings = build_settings(cli)?;
    match &cli.command {
        Command::Synth {
            stocks,
            words,
            n_days,
            sparsity,
            noise,
        } => commands::cmd_synth(&settings, *stocks, *words, *n_days, *sparsity, *noise),
        Command::Prepare { .. } => commands::cmd_prepare(&settings),
        Command::Train { .. } => commands::cmd_train(&settings),
        Command::Predict { .. } => commands::cmd_predict(&settings),
        Command::Backtest { .. } => commands::cmd_backtest(&settings),
        Command::Report { .. } => commands::cmd_report(&settings),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io(_) | Error::Csv(_) => 3,
        Error::Dimension(_)
        | Error::NonFinite(_)
        | Error::Convergence(_)
        | Error::Singular(_)
        | Error::UndefinedMetric(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
