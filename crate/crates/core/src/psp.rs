//! Next-day PnL distributions by surface projection.
//!
//! Tomorrow's spot is simulated by one GBM step; tomorrow's volatility
//! surface is today's fitted surface plus one historical day-over-day
//! coefficient delta. Each option is then repriced at its next-day moneyness
//! and maturity on the shifted surface.
//!
//! Random numbers come from one ChaCha stream per path index, so results do
//! not depend on how paths are scheduled across threads, and every model run
//! with the same seed sees the same spot draws.

use std::io::Write;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsm::{call_price, BsmInputs};
use crate::market_data::{MarketParams, OptionChain};
use crate::surface::{surface_delta, SplineSurface, SurfaceDelta};
use crate::{Error, Result, DAYS_PER_YEAR, VOL_FLOOR};

/// One GBM step `S' = S exp(mu - sigma^2 / 2 + sigma eps)` with per-step
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl GbmParams {
    pub fn new(mu: f64, sigma: f64, n_paths: usize, seed: u64) -> Result<Self> {
        let p = Self {
            mu,
            sigma,
            n_paths,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// Drift `(r - q) / trading_days_per_year` from annual market parameters.
    pub fn from_market(params: &MarketParams, sigma: f64, n_paths: usize, seed: u64) -> Result<Self> {
        Self::new(params.daily_drift(), sigma, n_paths, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() || !self.mu.is_finite() {
            return Err(Error::validation(format!(
                "GBM needs finite mu and sigma >= 0, got mu={} sigma={}",
                self.mu, self.sigma
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::validation("n_paths must be >= 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn step(&self, spot: f64, eps: f64) -> f64 {
        spot * (self.mu - 0.5 * self.sigma * self.sigma + self.sigma * eps).exp()
    }
}

struct PathDraw {
    eps: f64,
    uniform: f64,
}

fn path_draw(seed: u64, path: usize) -> PathDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    let eps = rng.sample(StandardNormal);
    let uniform = rng.random::<f64>();
    PathDraw { eps, uniform }
}

/// `n_paths` one-step GBM samples of tomorrow's spot.
pub fn simulate_next_prices(spot: f64, p: &GbmParams) -> Result<Vec<f64>> {
    if !(spot > 0.0) {
        return Err(Error::Domain(format!("spot must be positive, got {spot}")));
    }
    p.validate()?;
    Ok((0..p.n_paths)
        .into_par_iter()
        .map(|i| p.step(spot, path_draw(p.seed, i).eps))
        .collect())
}

/// Historical day-over-day surface deltas available on `as_of`, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub as_of: NaiveDate,
    pub deltas: Vec<SurfaceDelta>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

/// Consecutive coefficient differences of the surfaces dated on or before
/// `as_of`. `surfaces` must be in increasing date order.
pub fn build_scenario_set(surfaces: &[SplineSurface], as_of: NaiveDate) -> Result<ScenarioSet> {
    if surfaces.windows(2).any(|w| w[0].fit_date() >= w[1].fit_date()) {
        return Err(Error::validation("surfaces must be in strictly increasing date order"));
    }
    let n = surfaces.partition_point(|s| s.fit_date() <= as_of);
    if n < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: n,
        });
    }
    let deltas = surfaces[..n]
        .windows(2)
        .map(|w| surface_delta(&w[1], &w[0]))
        .collect::<Result<_>>()?;
    Ok(ScenarioSet { as_of, deltas })
}

/// Scenario weights; [`WeightScheme::weights`] always normalizes to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    #[default]
    Uniform,
    /// Weight proportional to `exp(-lambda * age)`, age 0 being the newest
    /// scenario.
    Exponential { lambda: f64 },
    /// Explicit weights, oldest scenario first.
    Custom { weights: Vec<f64> },
}

impl WeightScheme {
    pub fn weights(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidWeights("no scenarios to weight".into()));
        }
        let raw: Vec<f64> = match self {
            WeightScheme::Uniform => vec![1.0; n],
            WeightScheme::Exponential { lambda } => {
                if !(*lambda >= 0.0) {
                    return Err(Error::InvalidWeights(format!("lambda must be >= 0, got {lambda}")));
                }
                (0..n)
                    .map(|j| {
                        let age = (n - 1 - j) as f64;
                        if age == 0.0 {
                            1.0
                        } else {
                            (-lambda * age).exp()
                        }
                    })
                    .collect()
            }
            WeightScheme::Custom { weights } => {
                if weights.len() != n {
                    return Err(Error::WeightMismatch {
                        weights: weights.len(),
                        scenarios: n,
                    });
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(Error::InvalidWeights("weights must be finite and >= 0".into()));
                }
                weights.clone()
            }
        };
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        Ok(raw.into_iter().map(|w| w / total).collect())
    }
}

/// Inverse-CDF sampling of a scenario index.
struct ScenarioSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl ScenarioSampler {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let last_positive = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
        Self {
            cumulative,
            last_positive,
        }
    }

    fn pick(&self, uniform: f64) -> usize {
        let target = uniform * self.cumulative.last().copied().unwrap_or(1.0);
        self.cumulative
            .partition_point(|c| *c <= target)
            .min(self.last_positive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub strike: f64,
    pub expiry: NaiveDate,
    pub quantity: f64,
    /// Today's implied volatility of the option.
    pub entry_vol: f64,
}

impl Position {
    pub fn new(strike: f64, expiry: NaiveDate, quantity: f64, entry_vol: f64) -> Result<Self> {
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(Error::validation(format!("strike must be > 0, got {strike}")));
        }
        if !quantity.is_finite() || !(entry_vol >= 0.0) || !entry_vol.is_finite() {
            return Err(Error::validation("quantity and entry vol must be finite, vol >= 0"));
        }
        Ok(Self {
            strike,
            expiry,
            quantity,
            entry_vol,
        })
    }

    /// Year fraction to expiry from `as_of`.
    pub fn ttm(&self, as_of: NaiveDate) -> f64 {
        (self.expiry - as_of).num_days() as f64 / DAYS_PER_YEAR
    }

    /// Whether the option is still alive after a one-day step from `as_of`.
    pub fn survives_next_day(&self, as_of: NaiveDate) -> bool {
        self.expiry > as_of + Days::new(1)
    }

    fn require_next_day(&self, as_of: NaiveDate) -> Result<f64> {
        if !self.survives_next_day(as_of) {
            return Err(Error::ExpiryTooNear {
                expiry: self.expiry,
                as_of,
            });
        }
        Ok(self.ttm(as_of))
    }
}

/// Outcome of one volatility lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct VolEval {
    pub vol: f64,
    pub floored: bool,
    pub clamped: bool,
}

impl VolEval {
    pub(crate) fn floor(raw: f64, clamped: bool) -> Self {
        if raw < VOL_FLOOR || raw.is_nan() {
            Self {
                vol: VOL_FLOOR,
                floored: true,
                clamped,
            }
        } else {
            Self {
                vol: raw,
                floored: false,
                clamped,
            }
        }
    }
}

fn surface_vol(surface: &SplineSurface, s_next: f64, strike: f64, tau_next: f64) -> VolEval {
    let m = s_next / strike;
    VolEval::floor(surface.eval(m, tau_next), surface.is_clamped(m, tau_next))
}

/// Next-day volatility of `pos` under one surface scenario: the moneyness
/// moves to `S_next / K`, the maturity shortens by one day and the surface
/// is `surface_t + delta`. Negative values are floored at [`VOL_FLOOR`].
pub fn next_day_vol(
    surface_t: &SplineSurface,
    delta: &SurfaceDelta,
    s_next: f64,
    pos: &Position,
    as_of: NaiveDate,
) -> Result<f64> {
    let tau = pos.require_next_day(as_of)?;
    let next = surface_t.shifted(delta, as_of)?;
    Ok(surface_vol(&next, s_next, pos.strike, tau - 1.0 / DAYS_PER_YEAR).vol)
}

/// Weighted pool of volatility samples.
#[derive(Debug, Clone, PartialEq)]
pub struct VolMixture {
    pub samples: Vec<f64>,
    pub weights: Vec<f64>,
}

impl VolMixture {
    pub fn mean(&self) -> f64 {
        self.samples.iter().zip(&self.weights).map(|(s, w)| s * w).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Mixes per-scenario samples: every sample of scenario `i` carries
/// `w_i / len_i`. Zero-weight scenarios are left out.
pub fn aggregate_vol_distribution(per_scenario: &[Vec<f64>], w: &WeightScheme) -> Result<VolMixture> {
    let weights = w.weights(per_scenario.len())?;
    if per_scenario.iter().any(|s| s.is_empty()) {
        return Err(Error::EmptySamples);
    }
    let mut samples = Vec::new();
    let mut sample_weights = Vec::new();
    for (scenario, wi) in per_scenario.iter().zip(weights) {
        if wi == 0.0 {
            continue;
        }
        let each = wi / scenario.len() as f64;
        samples.extend_from_slice(scenario);
        sample_weights.extend(std::iter::repeat_n(each, scenario.len()));
    }
    Ok(VolMixture {
        samples,
        weights: sample_weights,
    })
}

/// Empirical distribution of next-day portfolio value changes. Samples are
/// equally weighted unless `weights` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnLDistribution {
    pub as_of: NaiveDate,
    pub samples: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl PnLDistribution {
    pub fn new(as_of: NaiveDate, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::validation("PnL samples must be finite"));
        }
        Ok(Self {
            as_of,
            samples,
            weights: None,
        })
    }

    pub fn weighted(as_of: NaiveDate, samples: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut d = Self::new(as_of, samples)?;
        if weights.len() != d.samples.len() || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidWeights("sample weights must match and be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if !((total - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidWeights(format!("sample weights sum to {total}")));
        }
        d.weights = Some(weights);
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.samples.len() as f64,
        }
    }

    pub fn mean(&self) -> f64 {
        (0..self.len()).map(|i| self.samples[i] * self.weight(i)).sum()
    }

    /// Writes one sample per row under a `pnl` header; a `weight` column is
    /// added for weighted distributions.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        match &self.weights {
            None => {
                wtr.write_record(["pnl"])?;
                for s in &self.samples {
                    wtr.write_record([s.to_string()])?;
                }
            }
            Some(w) => {
                wtr.write_record(["pnl", "weight"])?;
                for (s, w) in self.samples.iter().zip(w) {
                    wtr.write_record([s.to_string(), w.to_string()])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// How Monte Carlo paths are joined with surface scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Each path draws one scenario from the weights: `n_paths` samples.
    #[default]
    Sampled,
    /// Every path with every positively weighted scenario.
    CrossProduct,
}

/// Spot used when repricing tomorrow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpotMode {
    #[default]
    Simulated,
    /// Reprice at today's spot; only the volatility and maturity move.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub gbm: GbmParams,
    pub weights: WeightScheme,
    pub pairing: Pairing,
    pub spot_mode: SpotMode,
}

impl SimulationSettings {
    pub fn new(gbm: GbmParams) -> Self {
        Self {
            gbm,
            weights: WeightScheme::Uniform,
            pairing: Pairing::Sampled,
            spot_mode: SpotMode::Simulated,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnlOutcome {
    pub distribution: PnLDistribution,
    /// Position evaluations whose volatility was floored.
    pub vol_floors: usize,
    /// Position evaluations that fell outside the surface domain.
    pub clamps: usize,
}

struct PricedPosition {
    pos: Position,
    today: f64,
    tau_next: f64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    floors: usize,
    clamps: usize,
}

impl Tally {
    fn add(self, other: Tally) -> Tally {
        Tally {
            floors: self.floors + other.floors,
            clamps: self.clamps + other.clamps,
        }
    }
}

/// Shared Monte Carlo harness of all models. `next_vol(scenario, position,
/// s_next, tau_next)` supplies the model-specific next-day volatility.
pub(crate) fn simulate_portfolio<F>(
    as_of: NaiveDate,
    spot: f64,
    portfolio: &[Position],
    settings: &SimulationSettings,
    params: &MarketParams,
    scenario_weights: &[f64],
    next_vol: F,
) -> Result<PnlOutcome>
where
    F: Fn(usize, usize, f64, f64) -> VolEval + Sync,
{
    settings.gbm.validate()?;
    if !(spot > 0.0) {
        return Err(Error::Domain(format!("spot must be positive, got {spot}")));
    }
    let rate = params.risk_free_rate;
    let priced = portfolio
        .iter()
        .map(|pos| {
            let tau = pos.require_next_day(as_of)?;
            let today = call_price(&BsmInputs::new(spot, pos.strike, rate, tau, pos.entry_vol))?;
            Ok(PricedPosition {
                pos: *pos,
                today,
                tau_next: tau - 1.0 / DAYS_PER_YEAR,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let gbm = settings.gbm;
    let sampler = ScenarioSampler::new(scenario_weights);
    let revalue = |scenario: usize, s_next: f64| -> Result<(f64, Tally)> {
        let mut pnl = 0.0;
        let mut tally = Tally::default();
        for (i, p) in priced.iter().enumerate() {
            let v = next_vol(scenario, i, s_next, p.tau_next);
            tally.floors += v.floored as usize;
            tally.clamps += v.clamped as usize;
            let next = call_price(&BsmInputs::new(s_next, p.pos.strike, rate, p.tau_next, v.vol))?;
            pnl += p.pos.quantity * (next - p.today);
        }
        Ok((pnl, tally))
    };
    let next_spot = |path: usize| -> (f64, f64) {
        let draw = path_draw(gbm.seed, path);
        let s = match settings.spot_mode {
            SpotMode::Simulated => gbm.step(spot, draw.eps),
            SpotMode::Frozen => spot,
        };
        (s, draw.uniform)
    };

    match settings.pairing {
        Pairing::Sampled => {
            let per_path = (0..gbm.n_paths)
                .into_par_iter()
                .map(|path| {
                    let (s_next, u) = next_spot(path);
                    revalue(sampler.pick(u), s_next)
                })
                .collect::<Result<Vec<_>>>()?;
            let tally = per_path.iter().fold(Tally::default(), |a, (_, t)| a.add(*t));
            let samples = per_path.into_iter().map(|(p, _)| p).collect();
            Ok(PnlOutcome {
                distribution: PnLDistribution::new(as_of, samples)?,
                vol_floors: tally.floors,
                clamps: tally.clamps,
            })
        }
        Pairing::CrossProduct => {
            let active: Vec<(usize, f64)> = scenario_weights
                .iter()
                .copied()
                .enumerate()
                .filter(|(_, w)| *w > 0.0)
                .collect();
            let per_path = (0..gbm.n_paths)
                .into_par_iter()
                .map(|path| {
                    let (s_next, _) = next_spot(path);
                    active
                        .iter()
                        .map(|&(j, w)| revalue(j, s_next).map(|(p, t)| (p, w, t)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let n_paths = gbm.n_paths as f64;
            let mut samples = Vec::new();
            let mut weights = Vec::new();
            let mut tally = Tally::default();
            for (p, w, t) in per_path.into_iter().flatten() {
                samples.push(p);
                weights.push(w / n_paths);
                tally = tally.add(t);
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            Ok(PnlOutcome {
                distribution: PnLDistribution::weighted(as_of, samples, weights)?,
                vol_floors: tally.floors,
                clamps: tally.clamps,
            })
        }
    }
}

pub(crate) fn chain_spot(chain: &OptionChain) -> Result<f64> {
    chain.spot().ok_or_else(|| {
        Error::validation(format!("chain for {} has no quotes to read the spot from", chain.quote_date))
    })
}

/// Surface-projection PnL distribution for `portfolio` on the chain's date.
///
/// `surfaces` is the date-ordered fitted history; the surface dated on the
/// chain's quote date is today's surface and the deltas of all surfaces up
/// to that date are the scenarios. Position entry vols are today's vols.
pub fn psp_pnl(
    portfolio: &[Position],
    surfaces: &[SplineSurface],
    chain_t: &OptionChain,
    settings: &SimulationSettings,
    params: &MarketParams,
) -> Result<PnlOutcome> {
    let as_of = chain_t.quote_date;
    let spot = chain_spot(chain_t)?;
    let scenarios = build_scenario_set(surfaces, as_of)?;
    let today = surfaces
        .iter()
        .find(|s| s.fit_date() == as_of)
        .ok_or_else(|| Error::Misaligned(format!("no surface fitted for {as_of}")))?;
    let next_surfaces = scenarios
        .deltas
        .iter()
        .map(|d| today.shifted(d, as_of))
        .collect::<Result<Vec<_>>>()?;
    let weights = settings.weights.weights(next_surfaces.len())?;
    simulate_portfolio(as_of, spot, portfolio, settings, params, &weights, |j, i, s_next, tau_next| {
        surface_vol(&next_surfaces[j], s_next, portfolio[i].strike, tau_next)
    })
}

fn simple_returns(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

/// Pearson correlation between the one-day returns of an option's implied
/// volatility and those of the underlying.
pub fn vol_price_correlation(vols: &[f64], prices: &[f64]) -> Result<f64> {
    if vols.len() != prices.len() {
        return Err(Error::Misaligned(format!(
            "{} vols against {} prices",
            vols.len(),
            prices.len()
        )));
    }
    if vols.len() < 3 {
        return Err(Error::InsufficientHistory {
            needed: 3,
            available: vols.len(),
        });
    }
    if vols.iter().chain(prices).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("series must be positive to form returns".into()));
    }
    let x = simple_returns(vols);
    let y = simple_returns(prices);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(&y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation of a zero-variance return series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
