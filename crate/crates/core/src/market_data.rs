//! Option chains, market parameters and the VIX reference series.
//!
//! Chains are read from and written to a flat CSV layout
//! (`quote_date,expiry_date,strike,bid,ask,underlying_price`). The VIX file
//! is `date,level` with the level in index points.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bsm::{call_lower_bound, call_price, BsmInputs};
use crate::{Error, Result, DAYS_PER_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub quote_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
    pub underlying_price: f64,
}

impl OptionQuote {
    pub fn new(
        quote_date: NaiveDate,
        expiry_date: NaiveDate,
        strike: f64,
        bid: f64,
        ask: f64,
        underlying_price: f64,
    ) -> Result<Self> {
        let q = Self {
            quote_date,
            expiry_date,
            strike,
            bid,
            ask,
            underlying_price,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::validation(m));
        if !(self.bid >= 0.0) || !self.bid.is_finite() {
            return fail(format!("bid must be >= 0, got {}", self.bid));
        }
        if !(self.ask >= self.bid) || !self.ask.is_finite() {
            return fail(format!("ask {} is below bid {}", self.ask, self.bid));
        }
        if self.expiry_date <= self.quote_date {
            return fail(format!(
                "expiry {} is not after quote date {}",
                self.expiry_date, self.quote_date
            ));
        }
        if !(self.strike > 0.0) || !self.strike.is_finite() {
            return fail(format!("strike must be > 0, got {}", self.strike));
        }
        if !(self.underlying_price > 0.0) || !self.underlying_price.is_finite() {
            return fail(format!(
                "underlying price must be > 0, got {}",
                self.underlying_price
            ));
        }
        Ok(())
    }

    pub fn mid(&self) -> f64 {
        mid_price(self)
    }

    pub fn days_to_expiry(&self) -> i64 {
        (self.expiry_date - self.quote_date).num_days()
    }

    /// Calendar year fraction to expiry.
    pub fn ttm(&self) -> f64 {
        self.days_to_expiry() as f64 / DAYS_PER_YEAR
    }

    /// Spot moneyness `S / K`.
    pub fn moneyness(&self) -> f64 {
        self.underlying_price / self.strike
    }
}

/// Average of bid and ask.
pub fn mid_price(q: &OptionQuote) -> f64 {
    0.5 * (q.bid + q.ask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    pub quote_date: NaiveDate,
    pub quotes: Vec<OptionQuote>,
}

impl OptionChain {
    /// Builds a chain, rejecting quotes from other dates. Duplicate
    /// `(expiry, strike)` rows keep the first occurrence.
    pub fn new(quote_date: NaiveDate, quotes: Vec<OptionQuote>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        let mut kept = Vec::with_capacity(quotes.len());
        for q in quotes {
            if q.quote_date != quote_date {
                return Err(Error::validation(format!(
                    "quote dated {} in chain for {}",
                    q.quote_date, quote_date
                )));
            }
            q.validate()?;
            if seen.insert((q.expiry_date, q.strike.to_bits())) {
                kept.push(q);
            } else {
                log::warn!(
                    "duplicate quote {} K={} on {}; keeping the first",
                    q.expiry_date,
                    q.strike,
                    quote_date
                );
            }
        }
        Ok(Self {
            quote_date,
            quotes: kept,
        })
    }

    /// Underlying price of the chain, taken from its first quote.
    pub fn spot(&self) -> Option<f64> {
        self.quotes.first().map(|q| q.underlying_price)
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn find(&self, expiry: NaiveDate, strike: f64) -> Option<&OptionQuote> {
        self.quotes
            .iter()
            .find(|q| q.expiry_date == expiry && q.strike == strike)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_days_to_expiry: i64,
    pub min_mid_price: f64,
    /// Drop quotes whose mid is below `max(S - K e^{-r tau}, 0)`.
    pub enforce_lower_bound: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_days_to_expiry: 15,
            min_mid_price: 1.0,
            enforce_lower_bound: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_days_to_expiry < 0 || !(self.min_mid_price >= 0.0) {
            return Err(Error::validation(
                "filter thresholds must be non-negative".to_string(),
            ));
        }
        Ok(())
    }

    pub fn accepts(&self, q: &OptionQuote, params: &MarketParams) -> bool {
        let mid = q.mid();
        if q.days_to_expiry() < self.min_days_to_expiry || mid < self.min_mid_price {
            return false;
        }
        !self.enforce_lower_bound
            || mid
                >= call_lower_bound(
                    q.underlying_price,
                    q.strike,
                    params.risk_free_rate,
                    q.ttm(),
                )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketParams {
    /// Annualized risk-free rate.
    pub risk_free_rate: f64,
    /// Annualized continuous dividend yield.
    pub dividend_yield: f64,
    pub trading_days_per_year: u32,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            risk_free_rate: 0.1406,
            dividend_yield: 0.0194,
            trading_days_per_year: 252,
        }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if self.trading_days_per_year == 0 {
            return Err(Error::validation("trading_days_per_year must be > 0"));
        }
        if !self.risk_free_rate.is_finite() || !self.dividend_yield.is_finite() {
            return Err(Error::validation("rates must be finite"));
        }
        Ok(())
    }

    /// Per-step drift `(r - q) / trading_days_per_year`.
    pub fn daily_drift(&self) -> f64 {
        (self.risk_free_rate - self.dividend_yield) / self.trading_days_per_year as f64
    }
}

/// Keeps the quotes that pass every rule of `cfg`, in their original order.
pub fn filter_chain(chain: &OptionChain, cfg: &FilterConfig, params: &MarketParams) -> OptionChain {
    OptionChain {
        quote_date: chain.quote_date,
        quotes: chain
            .quotes
            .iter()
            .filter(|q| cfg.accepts(q, params))
            .copied()
            .collect(),
    }
}

/// VIX levels stored as decimal volatilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VixSeries {
    dates: Vec<NaiveDate>,
    levels: Vec<f64>,
}

impl VixSeries {
    pub fn new(dates: Vec<NaiveDate>, levels: Vec<f64>) -> Result<Self> {
        if dates.len() != levels.len() {
            return Err(Error::validation("VIX dates and levels differ in length"));
        }
        if let Some(l) = levels.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::validation(format!("VIX level must be > 0, got {l}")));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("VIX dates must be strictly increasing"));
        }
        Ok(Self { dates, levels })
    }

    /// Builds the series from index points (divided by 100).
    pub fn from_index_points(dates: Vec<NaiveDate>, points: &[f64]) -> Result<Self> {
        Self::new(dates, points.iter().map(|p| p / 100.0).collect())
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Number of observations dated on or before `as_of`.
    pub fn count_up_to(&self, as_of: NaiveDate) -> usize {
        self.dates.partition_point(|d| *d <= as_of)
    }

    /// Observations on or before `as_of` as `(previous, current)` level pairs,
    /// oldest first.
    pub fn level_pairs_up_to(&self, as_of: NaiveDate) -> Vec<(f64, f64)> {
        let n = self.count_up_to(as_of);
        self.levels[..n].windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// One-day first differences of the levels up to `as_of`.
    pub fn changes_up_to(&self, as_of: NaiveDate) -> Vec<f64> {
        self.level_pairs_up_to(as_of)
            .into_iter()
            .map(|(a, b)| b - a)
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainRow {
    quote_date: String,
    expiry_date: String,
    strike: f64,
    bid: f64,
    ask: f64,
    underlying_price: f64,
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        line,
        message: format!("invalid date {s:?}: {e}"),
    })
}

/// Reads chain CSV rows and groups them into one chain per quote date,
/// sorted by date, keeping row order within each date.
pub fn read_chains<R: Read>(reader: R) -> Result<Vec<OptionChain>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut by_date: BTreeMap<NaiveDate, Vec<OptionQuote>> = BTreeMap::new();
    let headers = rdr.headers()?.clone();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: ChainRow = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let quote = OptionQuote {
            quote_date: parse_date(&row.quote_date, line)?,
            expiry_date: parse_date(&row.expiry_date, line)?,
            strike: row.strike,
            bid: row.bid,
            ask: row.ask,
            underlying_price: row.underlying_price,
        };
        quote.validate().map_err(|e| match e {
            Error::Validation { message, .. } => Error::Validation {
                line: Some(line),
                message,
            },
            other => other,
        })?;
        by_date.entry(quote.quote_date).or_default().push(quote);
    }
    by_date
        .into_iter()
        .map(|(date, quotes)| OptionChain::new(date, quotes))
        .collect()
}

pub fn load_chains(path: impl AsRef<Path>) -> Result<Vec<OptionChain>> {
    read_chains(std::fs::File::open(path)?)
}

pub fn write_chains<W: Write>(writer: W, chains: &[OptionChain]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for chain in chains {
        for q in &chain.quotes {
            wtr.serialize(ChainRow {
                quote_date: q.quote_date.to_string(),
                expiry_date: q.expiry_date.to_string(),
                strike: q.strike,
                bid: q.bid,
                ask: q.ask,
                underlying_price: q.underlying_price,
            })?;
        }
    }
    if chains.iter().all(|c| c.quotes.is_empty()) {
        wtr.write_record([
            "quote_date",
            "expiry_date",
            "strike",
            "bid",
            "ask",
            "underlying_price",
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct VixRow {
    date: String,
    level: f64,
}

/// Reads `date,level` rows; levels are in index points.
pub fn read_vix<R: Read>(reader: R) -> Result<VixSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut dates = Vec::new();
    let mut points = Vec::new();
    for (i, row) in rdr.deserialize::<VixRow>().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(line),
            message: e.to_string(),
        })?;
        dates.push(parse_date(&row.date, line)?);
        points.push(row.level);
    }
    VixSeries::from_index_points(dates, &points)
}

pub fn load_vix(path: impl AsRef<Path>) -> Result<VixSeries> {
    read_vix(std::fs::File::open(path)?)
}

pub fn write_vix<W: Write>(writer: W, vix: &VixSeries) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "level"])?;
    for (d, l) in vix.dates.iter().zip(&vix.levels) {
        wtr.write_record([d.to_string(), (l * 100.0).to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Strike/expiry grid and dynamics of the synthetic market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub start_date: NaiveDate,
    pub spot0: f64,
    pub strikes: Vec<f64>,
    pub expiries: Vec<NaiveDate>,
    pub params: MarketParams,
    /// Long-run ATM volatility level.
    pub base_vol: f64,
    /// Mean reversion speed of the ATM level per day.
    pub vol_reversion: f64,
    /// Daily volatility of the ATM level.
    pub vol_of_vol: f64,
    /// Sensitivity of the ATM level to the spot log-return.
    pub leverage: f64,
    pub skew: f64,
    pub curvature: f64,
    pub term_slope: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let start_date = NaiveDate::from_ymd_opt(2013, 1, 3).expect("valid date");
        // Every fourth Friday for two years.
        let first_friday = (0..7)
            .map(|d| start_date + Days::new(14 + d))
            .find(|d| d.weekday() == Weekday::Fri)
            .expect("a Friday within a week");
        let expiries = (0..26u64).map(|i| first_friday + Days::new(28 * i)).collect();
        let strikes = (0..=40).map(|i| 60.0 + 2.5 * i as f64).collect();
        Self {
            start_date,
            spot0: 100.0,
            strikes,
            expiries,
            params: MarketParams::default(),
            base_vol: 0.18,
            vol_reversion: 0.05,
            vol_of_vol: 0.004,
            leverage: 0.5,
            skew: 0.15,
            curvature: 0.25,
            term_slope: 0.02,
        }
    }
}

impl SynthConfig {
    /// Smile used to price the synthetic quotes.
    pub fn smile_vol(&self, level: f64, spot: f64, strike: f64, ttm: f64) -> f64 {
        let k = (strike / spot).ln();
        let v = level - self.skew * k + self.curvature * k * k + self.term_slope * (1.0 + ttm).ln();
        v.max(0.05)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthMarket {
    pub chains: Vec<OptionChain>,
    pub vix: VixSeries,
}

/// Deterministic synthetic market: `n_days` business days of call chains
/// priced off a slowly moving smile, plus a matching VIX series. Only quotes
/// that pass the default filter are emitted.
pub fn synth_market(seed: u64, n_days: usize, cfg: &SynthConfig) -> Result<SynthMarket> {
    if n_days == 0 || cfg.strikes.is_empty() || cfg.expiries.is_empty() {
        return Err(Error::validation("synthetic grid and day count must be non-empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filter = FilterConfig::default();
    let drift = cfg.params.daily_drift();
    let days_per_year = cfg.params.trading_days_per_year as f64;

    let mut date = cfg.start_date;
    while is_weekend(date) {
        date = date + Days::new(1);
    }
    let mut spot = cfg.spot0;
    let mut level = cfg.base_vol;
    let mut chains = Vec::with_capacity(n_days);
    let mut vix_dates = Vec::with_capacity(n_days);
    let mut vix_levels = Vec::with_capacity(n_days);

    for day in 0..n_days {
        if day > 0 {
            let z_spot: f64 = rng.sample(StandardNormal);
            let z_vol: f64 = rng.sample(StandardNormal);
            let daily_vol = level / days_per_year.sqrt();
            let log_ret = drift - 0.5 * daily_vol * daily_vol + daily_vol * z_spot;
            spot *= log_ret.exp();
            level += cfg.vol_reversion * (cfg.base_vol - level) - cfg.leverage * log_ret
                + cfg.vol_of_vol * z_vol;
            level = level.max(0.06);
            date = next_business_day(date);
        }
        let mut quotes = Vec::new();
        for &expiry in &cfg.expiries {
            if expiry <= date {
                continue;
            }
            let ttm = (expiry - date).num_days() as f64 / DAYS_PER_YEAR;
            for &strike in &cfg.strikes {
                let vol = cfg.smile_vol(level, spot, strike, ttm);
                let theo = call_price(&BsmInputs::new(
                    spot,
                    strike,
                    cfg.params.risk_free_rate,
                    ttm,
                    vol,
                ))?;
                let half_spread = (0.01 * theo).max(0.025);
                let bid = round_cents(theo - half_spread).max(0.0);
                let ask = round_cents(theo + half_spread);
                let quote = OptionQuote {
                    quote_date: date,
                    expiry_date: expiry,
                    strike,
                    bid,
                    ask,
                    underlying_price: spot,
                };
                if filter.accepts(&quote, &cfg.params) && quote.mid() < spot {
                    quotes.push(quote);
                }
            }
        }
        chains.push(OptionChain::new(date, quotes)?);
        let thirty_day = cfg.smile_vol(level, spot, spot, 30.0 / DAYS_PER_YEAR);
        let noise: f64 = rng.sample(StandardNormal);
        vix_dates.push(date);
        // Quoted to two decimals in index points.
        let points = ((thirty_day * 100.0 + 0.3 * noise).max(5.0) * 100.0).round() / 100.0;
        vix_levels.push(points);
    }
    Ok(SynthMarket {
        chains,
        vix: VixSeries::from_index_points(vix_dates, &vix_levels)?,
    })
}

/// Synthetic chains only; see [`synth_market`].
pub fn synth_chain(seed: u64, n_days: usize, cfg: &SynthConfig) -> Result<Vec<OptionChain>> {
    Ok(synth_market(seed, n_days, cfg)?.chains)
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn is_weekend(d: NaiveDate) -> bool {
    matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

fn next_business_day(d: NaiveDate) -> NaiveDate {
    let mut next = d + Days::new(1);
    while is_weekend(next) {
        next = next + Days::new(1);
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn quote(days: u64, strike: f64, bid: f64, ask: f64, spot: f64) -> OptionQuote {
        let qd = date(2013, 1, 3);
        OptionQuote::new(qd, qd + Days::new(days), strike, bid, ask, spot).unwrap()
    }

    #[test]
    fn mid_price_examples() {
        assert_eq!(quote(30, 100.0, 4.0, 6.0, 100.0).mid(), 5.0);
        assert_eq!(quote(30, 100.0, 0.0, 0.0, 100.0).mid(), 0.0);
        assert_eq!(quote(30, 100.0, 1.25, 1.75, 100.0).mid(), 1.5);
    }

    #[test]
    fn quote_invariants_rejected() {
        let qd = date(2013, 1, 3);
        assert!(OptionQuote::new(qd, qd + Days::new(5), 100.0, 2.0, 1.0, 100.0).is_err());
        assert!(OptionQuote::new(qd, qd, 100.0, 1.0, 2.0, 100.0).is_err());
        assert!(OptionQuote::new(qd, qd + Days::new(5), 0.0, 1.0, 2.0, 100.0).is_err());
        assert!(OptionQuote::new(qd, qd + Days::new(5), 100.0, 1.0, 2.0, -1.0).is_err());
    }

    fn chain_of(quotes: Vec<OptionQuote>) -> OptionChain {
        OptionChain::new(quotes[0].quote_date, quotes).unwrap()
    }

    #[test]
    fn filter_rules() {
        let zero_rate = MarketParams {
            risk_free_rate: 0.0,
            ..MarketParams::default()
        };
        let cfg = FilterConfig::default();
        let short = quote(10, 100.0, 4.0, 6.0, 100.0);
        let cheap = quote(60, 120.0, 0.5, 1.0, 100.0);
        let below_bound = quote(365, 80.0, 14.0, 16.0, 100.0);
        let good = quote(60, 100.0, 4.0, 6.0, 100.0);
        let filtered = filter_chain(
            &chain_of(vec![short, cheap, below_bound, good]),
            &cfg,
            &zero_rate,
        );
        assert_eq!(filtered.quotes, vec![good]);

        let lax = FilterConfig {
            enforce_lower_bound: false,
            ..cfg
        };
        let filtered = filter_chain(&chain_of(vec![below_bound]), &lax, &zero_rate);
        assert_eq!(filtered.len(), 1);
    }

    #[test]
    fn duplicate_quotes_keep_first() {
        let a = quote(30, 100.0, 4.0, 6.0, 100.0);
        let b = quote(30, 100.0, 5.0, 7.0, 100.0);
        let chain = chain_of(vec![a, b]);
        assert_eq!(chain.quotes, vec![a]);
    }

    #[test]
    fn read_chains_groups_by_date() {
        let csv = "quote_date,expiry_date,strike,bid,ask,underlying_price\n\
                   2013-01-03,2013-02-15,100,4.0,4.2,101\n\
                   2013-01-03,2013-02-15,105,2.0,2.2,101\n\
                   2013-01-03,2013-03-15,100,5.0,5.3,101\n";
        let chains = read_chains(csv.as_bytes()).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].len(), 3);
        assert_eq!(chains[0].quotes[1].strike, 105.0);
    }

    #[test]
    fn read_chains_reports_validation_line() {
        let csv = "quote_date,expiry_date,strike,bid,ask,underlying_price\n\
                   2013-01-03,2013-02-15,100,4.0,4.2,101\n\
                   2013-01-03,2013-02-15,105,2.5,2.2,101\n";
        match read_chains(csv.as_bytes()) {
            Err(Error::Validation { line: Some(3), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn read_chains_reports_parse_line() {
        let csv = "quote_date,expiry_date,strike,bid,ask,underlying_price\n\
                   2013-01-03,2013-02-15,abc,4.0,4.2,101\n";
        match read_chains(csv.as_bytes()) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let csv = "quote_date,expiry_date,strike,bid,ask,underlying_price\n\
                   2013-01-03,2013-02-15,100,4.0,4.2,101\n\
                   2013-13-03,2013-02-15,100,4.0,4.2,101\n";
        assert!(matches!(read_chains(csv.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn read_empty_input() {
        assert!(read_chains("".as_bytes()).unwrap().is_empty());
        let header_only = "quote_date,expiry_date,strike,bid,ask,underlying_price\n";
        assert!(read_chains(header_only.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn vix_round_trip_and_changes() {
        let csv = "date,level\n2013-01-03,14.5\n2013-01-04,15.0\n2013-01-07,14.0\n";
        let vix = read_vix(csv.as_bytes()).unwrap();
        assert_eq!(vix.levels(), &[0.145, 0.15, 0.14]);
        let changes = vix.changes_up_to(date(2013, 1, 4));
        assert_eq!(changes.len(), 1);
        assert!((changes[0] - 0.005).abs() < 1e-15);
        let mut buf = Vec::new();
        write_vix(&mut buf, &vix).unwrap();
        assert_eq!(read_vix(buf.as_slice()).unwrap(), vix);
    }

    #[test]
    fn vix_rejects_bad_series() {
        let d = vec![date(2013, 1, 3), date(2013, 1, 3)];
        assert!(VixSeries::new(d, vec![0.1, 0.2]).is_err());
        assert!(VixSeries::new(vec![date(2013, 1, 3)], vec![0.0]).is_err());
    }

    #[test]
    fn synth_is_deterministic_and_sized() {
        let cfg = SynthConfig::default();
        let a = synth_market(7, 124, &cfg).unwrap();
        let b = synth_market(7, 124, &cfg).unwrap();
        assert_eq!(a.chains.len(), 124);
        assert_eq!(a.vix.len(), 124);
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        write_chains(&mut ba, &a.chains).unwrap();
        write_chains(&mut bb, &b.chains).unwrap();
        assert_eq!(ba, bb);
        let c = synth_market(8, 124, &cfg).unwrap();
        assert_ne!(a.chains, c.chains);
    }

    #[test]
    fn synth_quotes_pass_default_filter() {
        let cfg = SynthConfig::default();
        let chains = synth_chain(11, 30, &cfg).unwrap();
        let params = MarketParams::default();
        for chain in &chains {
            assert!(chain.len() > 100, "too few quotes on {}", chain.quote_date);
            let filtered = filter_chain(chain, &FilterConfig::default(), &params);
            assert_eq!(&filtered, chain);
            for q in &chain.quotes {
                assert!(q.bid <= q.mid() && q.mid() <= q.ask);
            }
        }
    }

    #[test]
    fn chain_csv_round_trip() {
        let chains = synth_chain(3, 3, &SynthConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_chains(&mut buf, &chains).unwrap();
        assert_eq!(read_chains(buf.as_slice()).unwrap(), chains);
    }

    fn arb_quote() -> impl Strategy<Value = OptionQuote> {
        (1u64..400, 50.0..150.0f64, 0.0..30.0f64, 0.0..2.0f64, 50.0..150.0f64).prop_map(
            |(days, strike, bid, spread, spot)| quote(days, strike, bid, bid + spread, spot),
        )
    }

    proptest! {
        #[test]
        fn filter_is_idempotent_subsequence(quotes in prop::collection::vec(arb_quote(), 1..40)) {
            let chain = OptionChain::new(quotes[0].quote_date, quotes).unwrap();
            let cfg = FilterConfig::default();
            let params = MarketParams::default();
            let once = filter_chain(&chain, &cfg, &params);
            let twice = filter_chain(&once, &cfg, &params);
            prop_assert_eq!(&once, &twice);
            let mut it = chain.quotes.iter();
            for q in &once.quotes {
                prop_assert!(it.any(|c| c == q));
            }
            for q in &chain.quotes {
                prop_assert!(q.bid <= q.mid() && q.mid() <= q.ask);
            }
        }
    }
}
