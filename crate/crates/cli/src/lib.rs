//! Batch driver for the `psp-core` risk engine: configuration, end-to-end
//! runs, backtest reports and plot data.

// `!(x >= 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

use std::path::{Path, PathBuf};

use psp_core::market_data::{synth_market, write_chains, write_vix, SynthConfig};

pub use config::{Model, RunConfig};
pub use error::CliError;
pub use pipeline::{run_pipeline, RunSummary};
pub use report::{emit_plot_data, run_backtest, BacktestReport};

/// Writes `chains.csv` and `vix.csv` for a synthetic market under `dir`.
pub fn write_synthetic(dir: &Path, seed: u64, n_days: usize) -> Result<(PathBuf, PathBuf), CliError> {
    let market = synth_market(seed, n_days, &SynthConfig::default())?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let chains = dir.join("chains.csv");
    let vix = dir.join("vix.csv");
    let file = |p: &Path| std::fs::File::create(p).map_err(|e| CliError::io(p, e));
    write_chains(file(&chains)?, &market.chains).map_err(|e| CliError::io(&chains, e))?;
    write_vix(file(&vix)?, &market.vix).map_err(|e| CliError::io(&vix, e))?;
    Ok((chains, vix))
}

/// Default config pointing at a synthetic data directory and an output
/// directory.
pub fn synthetic_config(data_dir: &Path, output_dir: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.paths.chains = data_dir.join("chains.csv");
    cfg.paths.vix = Some(data_dir.join("vix.csv"));
    cfg.paths.output_dir = output_dir.to_path_buf();
    cfg.seed = seed;
    cfg
}
