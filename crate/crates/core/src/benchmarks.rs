//! Constant-volatility and VIX-shock benchmark models.
//!
//! Both run through the same Monte Carlo harness as the surface model, so
//! with equal settings every model sees identical spot draws and only the
//! next-day volatility differs.

use serde::{Deserialize, Serialize};

use crate::market_data::{MarketParams, OptionChain, VixSeries};
use crate::psp::{chain_spot, simulate_portfolio, PnlOutcome, Position, SimulationSettings, VolEval};
use crate::{Error, Result};

/// Next-day volatility equals today's for every position.
pub fn const_vol_pnl(
    portfolio: &[Position],
    chain_t: &OptionChain,
    settings: &SimulationSettings,
    params: &MarketParams,
) -> Result<PnlOutcome> {
    let spot = chain_spot(chain_t)?;
    simulate_portfolio(chain_t.quote_date, spot, portfolio, settings, params, &[1.0], |_, i, _, _| {
        VolEval::floor(portfolio[i].entry_vol, false)
    })
}

/// How a historical VIX move is applied to an option's volatility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VixShock {
    /// `sigma + (VIX_j - VIX_{j-1})`.
    #[default]
    Additive,
    /// `sigma * VIX_j / VIX_{j-1}`.
    Proportional,
}

impl VixShock {
    pub fn apply(self, vol: f64, previous: f64, current: f64) -> f64 {
        match self {
            VixShock::Additive => vol + (current - previous),
            VixShock::Proportional => vol * current / previous,
        }
    }
}

/// Historical simulation on one-day VIX moves: each scenario shifts every
/// position's volatility by the same VIX move, floored at the volatility
/// floor. Scenario weights follow `settings.weights`, oldest move first.
pub fn vix_pnl(
    portfolio: &[Position],
    chain_t: &OptionChain,
    vix: &VixSeries,
    shock: VixShock,
    settings: &SimulationSettings,
    params: &MarketParams,
) -> Result<PnlOutcome> {
    let as_of = chain_t.quote_date;
    let pairs = vix.level_pairs_up_to(as_of);
    if pairs.is_empty() {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: vix.count_up_to(as_of),
        });
    }
    let spot = chain_spot(chain_t)?;
    let weights = settings.weights.weights(pairs.len())?;
    simulate_portfolio(as_of, spot, portfolio, settings, params, &weights, |j, i, _, _| {
        let (prev, cur) = pairs[j];
        VolEval::floor(shock.apply(portfolio[i].entry_vol, prev, cur), false)
    })
}
