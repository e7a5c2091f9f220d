//! Run configuration, stored as versioned JSON.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use psp_core::backtest::DmLoss;
use psp_core::benchmarks::VixShock;
use psp_core::market_data::{FilterConfig, MarketParams};
use psp_core::psp::{Pairing, SpotMode, WeightScheme};
use psp_core::surface::KnotLayout;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Psp,
    ConstVol,
    Vix,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Psp, Model::ConstVol, Model::Vix];

    pub fn name(self) -> &'static str {
        match self {
            Model::Psp => "psp",
            Model::ConstVol => "const_vol",
            Model::Vix => "vix",
        }
    }

    pub fn parse(s: &str) -> Option<Model> {
        Model::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Label used in file and column names: `0.9` becomes `90`, `0.975` becomes
/// `97_5`.
pub fn level_label(level: f64) -> String {
    let pct = (level * 1e6).round() / 1e4;
    if pct.fract() == 0.0 {
        format!("{pct:.0}")
    } else {
        pct.to_string().replace('.', "_")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub chains: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vix: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            chains: PathBuf::from("data/chains.csv"),
            vix: Some(PathBuf::from("data/vix.csv")),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Per-step volatility of the spot simulation.
    pub sigma: f64,
    pub n_paths: usize,
    pub pairing: Pairing,
    /// Spot used by the benchmark models when repricing.
    pub benchmark_spot: SpotMode,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            sigma: 0.05,
            n_paths: 1000,
            pairing: Pairing::Sampled,
            benchmark_spot: SpotMode::Simulated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub moneyness: KnotLayout,
    pub ttm: KnotLayout,
    pub ridge: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            moneyness: KnotLayout {
                lo: 0.7,
                hi: 1.3,
                n_breaks: 8,
            },
            ttm: KnotLayout {
                lo: 15.0 / 365.0,
                hi: 2.0,
                n_breaks: 8,
            },
            ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioConfig {
    /// Calls drawn without replacement from the first day's filtered chain.
    pub size: usize,
    pub quantity: f64,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        Self {
            size: 100,
            quantity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub dm_loss: DmLoss,
    /// Weight of the conservatism cost in the ranking penalty.
    pub ranking_kappa: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            dm_loss: DmLoss::Exceedance,
            ranking_kappa: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub paths: PathsConfig,
    pub filter: FilterConfig,
    pub market: MarketParams,
    pub simulation: SimulationConfig,
    pub surface: SurfaceConfig,
    pub weights: WeightScheme,
    pub vix_shock: VixShock,
    pub confidence_levels: Vec<f64>,
    pub models: Vec<Model>,
    pub portfolio: PortfolioConfig,
    pub backtest: BacktestConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            paths: PathsConfig::default(),
            filter: FilterConfig::default(),
            market: MarketParams::default(),
            simulation: SimulationConfig::default(),
            surface: SurfaceConfig::default(),
            weights: WeightScheme::Uniform,
            vix_shock: VixShock::Additive,
            confidence_levels: vec![0.90, 0.95],
            models: Model::ALL.to_vec(),
            portfolio: PortfolioConfig::default(),
            backtest: BacktestConfig::default(),
            seed: 20130103,
        }
    }
}

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.models.is_empty() {
            return Err(config_err("at least one model is required"));
        }
        if self.models.iter().collect::<HashSet<_>>().len() != self.models.len() {
            return Err(config_err("models must not repeat"));
        }
        if self.models.contains(&Model::Vix) && self.paths.vix.is_none() {
            return Err(config_err("the vix model needs paths.vix"));
        }
        if self.confidence_levels.is_empty() {
            return Err(config_err("at least one confidence level is required"));
        }
        if let Some(l) = self.confidence_levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(config_err(format!("confidence level {l} is outside (0, 1)")));
        }
        let labels: HashSet<_> = self.confidence_levels.iter().map(|l| level_label(*l)).collect();
        if labels.len() != self.confidence_levels.len() {
            return Err(config_err("confidence levels must be distinct"));
        }
        self.filter.validate().map_err(config_err)?;
        self.market.validate().map_err(config_err)?;
        self.surface.moneyness.validate().map_err(config_err)?;
        self.surface.ttm.validate().map_err(config_err)?;
        if !(self.surface.ridge >= 0.0) {
            return Err(config_err("surface.ridge must be >= 0"));
        }
        if !(self.simulation.sigma >= 0.0) || !self.simulation.sigma.is_finite() {
            return Err(config_err("simulation.sigma must be >= 0"));
        }
        if self.simulation.n_paths == 0 {
            return Err(config_err("simulation.n_paths must be >= 1"));
        }
        if self.portfolio.size == 0 || !self.portfolio.quantity.is_finite() {
            return Err(config_err("portfolio.size must be >= 1 and quantity finite"));
        }
        if !(self.backtest.ranking_kappa >= 0.0) {
            return Err(config_err("backtest.ranking_kappa must be >= 0"));
        }
        match &self.weights {
            WeightScheme::Exponential { lambda } if !(*lambda >= 0.0) => {
                Err(config_err("weights.lambda must be >= 0"))
            }
            WeightScheme::Custom { weights } if weights.iter().any(|w| !(*w >= 0.0)) => {
                Err(config_err("custom weights must be >= 0"))
            }
            _ => Ok(()),
        }
    }
}
