//! Market risk for option portfolios by projecting implied volatility
//! surface movements.
//!
//! The crate is organised bottom-up:
//!
//! - [`market_data`]: option chains, filtering, CSV ingestion and a synthetic
//!   market generator.
//! - [`bsm`]: Black-Scholes-Merton call pricing and implied volatility.
//! - [`surface`]: tensor-product cubic B-spline surfaces, day-over-day deltas,
//!   the polynomial and SVI representations and static arbitrage diagnostics.
//! - [`psp`]: Monte Carlo spot simulation combined with historical surface
//!   scenarios into next-day PnL distributions.
//! - [`benchmarks`]: constant-volatility and VIX-shock reference models.
//! - [`risk`]: empirical VaR and expected shortfall.
//! - [`backtest`]: coverage, independence and Diebold-Mariano tests and the
//!   penalty ranking model.

// `!(x >= 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod benchmarks;
pub mod bsm;
pub mod error;
pub mod market_data;
pub mod psp;
pub mod risk;
pub mod surface;

pub use error::{Error, Result};

/// Floor applied to any evaluated or shocked volatility before pricing.
pub const VOL_FLOOR: f64 = 1e-6;

/// Calendar days per year used for every time-to-maturity.
pub const DAYS_PER_YEAR: f64 = 365.0;
