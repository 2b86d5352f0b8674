//! A shared latent-factor model linking daily news word intensities to stock
//! log returns, fit by a matrix-variable ADMM with sparse group lasso
//! regularization, plus classical baselines and a daily backtesting engine.
//!
//! The model predicts the log return of stock `i` on day `t` as
//! `r̂_it = uᵢᵀ W y_t`, where `uᵢ` is a nonnegative per-stock factor vector,
//! `y_t` holds that morning's word intensities, and `W` maps words into the
//! shared factor space.

pub mod admm;
pub mod backtest;
pub mod baselines;
pub mod data;
pub mod error;
pub mod io;
pub mod linalg;
pub mod predict;
pub mod prox;

pub use error::{Error, Result};
