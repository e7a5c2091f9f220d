//! End-to-end batch run: surface fits, per-day model distributions, VaR/ES,
//! and the files they are persisted to.
//!
//! Run directory layout:
//!
//! ```text
//! manifest.json
//! surfaces/<date>.json
//! pnl/<model>/<date>.csv, pnl/<model>/<date>.meta.json
//! risk/<model>.json
//! daily/<model>.csv
//! backtest_report.json
//! plots/<model>_<level>.csv        (emit-plot-data)
//! ```
//!
//! Per-day dates are the forecast target days. All numeric output is a pure
//! function of the config and inputs; nothing time-dependent is written.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use psp_core::benchmarks::{const_vol_pnl, vix_pnl};
use psp_core::bsm::{call_price, BsmInputs};
use psp_core::market_data::{filter_chain, load_chains, load_vix, OptionChain, VixSeries};
use psp_core::psp::{psp_pnl, GbmParams, PnlOutcome, Position, SimulationSettings, SpotMode};
use psp_core::risk::{var_report, VarReport};
use psp_core::surface::{chain_points, fit_surface, static_arbitrage_diagnostics, DiagnosticGrid, SplineSurface};
use psp_core::VOL_FLOOR;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{level_label, Model, RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::report::{run_backtest, BacktestReport};

pub const MANIFEST: &str = "manifest.json";

/// Golden-ratio increment spreading per-day seeds over the seed space.
const DAY_SEED_STEP: u64 = 0x9E37_79B9_7F4A_7C15;

pub struct Inputs {
    /// Chains as read, used for spot and realized marks.
    pub raw: Vec<OptionChain>,
    /// Chains after the quote filter, used for fitting and the portfolio.
    pub filtered: Vec<OptionChain>,
    pub vix: Option<VixSeries>,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, CliError> {
    let path = &cfg.paths.chains;
    if !path.exists() {
        return Err(CliError::io(path, "chain file not found"));
    }
    let raw = load_chains(path).map_err(|e| CliError::reading(path, e))?;
    if let Some(c) = raw.iter().find(|c| c.spot().is_none()) {
        return Err(CliError::io(path, format!("no quotes on {}", c.quote_date)));
    }
    let filtered = raw.iter().map(|c| filter_chain(c, &cfg.filter, &cfg.market)).collect();
    let vix = match (&cfg.paths.vix, cfg.models.contains(&Model::Vix)) {
        (Some(p), true) => {
            if !p.exists() {
                return Err(CliError::io(p, "VIX file not found"));
            }
            Some(load_vix(p).map_err(|e| CliError::reading(p, e))?)
        }
        _ => None,
    };
    Ok(Inputs { raw, filtered, vix })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDiagnostics {
    pub date: NaiveDate,
    pub points: usize,
    pub inversion_failures: usize,
    pub out_of_range: usize,
    pub residual_norm: f64,
    pub arbitrage_violations: usize,
}

pub struct FittedSurface {
    pub surface: SplineSurface,
    pub diagnostics: SurfaceDiagnostics,
}

/// Fits one surface per chain, in parallel.
pub fn fit_surfaces(chains: &[OptionChain], cfg: &RunConfig) -> Result<Vec<FittedSurface>, CliError> {
    let layout = &cfg.surface;
    let knots_m = layout.moneyness.knots();
    let knots_t = layout.ttm.knots();
    chains
        .par_iter()
        .map(|chain| {
            let pts = chain_points(
                chain,
                &cfg.market,
                (layout.moneyness.lo, layout.moneyness.hi),
                (layout.ttm.lo, layout.ttm.hi),
            );
            let surface = fit_surface(&pts.points, &knots_m, &knots_t, layout.ridge, chain.quote_date)
                .inspect_err(|e| log::error!("surface fit for {} failed: {e}", chain.quote_date))?;
            let spot = chain.spot().unwrap_or(1.0);
            let grid = DiagnosticGrid::uniform(&surface, 13, 9);
            let arbitrage = static_arbitrage_diagnostics(&surface, &grid, spot, cfg.market.risk_free_rate);
            Ok(FittedSurface {
                diagnostics: SurfaceDiagnostics {
                    date: chain.quote_date,
                    points: pts.points.len(),
                    inversion_failures: pts.inversion_failures,
                    out_of_range: pts.out_of_range,
                    residual_norm: surface.residual_norm(),
                    arbitrage_violations: arbitrage.violation_count(),
                },
                surface,
            })
        })
        .collect()
}

/// Draws the portfolio without replacement from `chain`, in chain order.
pub fn select_portfolio(chain: &OptionChain, cfg: &RunConfig) -> Result<Vec<Position>, CliError> {
    let n = chain.quotes.len();
    if n == 0 {
        return Err(CliError::Numeric(psp_core::Error::EmptySamples));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, cfg.portfolio.size.min(n)).into_vec();
    idx.sort_unstable();
    idx.into_iter()
        .map(|i| {
            let q = &chain.quotes[i];
            Position::new(q.strike, q.expiry_date, cfg.portfolio.quantity, 0.0).map_err(CliError::from)
        })
        .collect()
}

fn day_seed(base: u64, day: usize) -> u64 {
    base.wrapping_add((day as u64).wrapping_mul(DAY_SEED_STEP))
}

fn surface_vol(surface: &SplineSurface, spot: f64, pos: &Position, date: NaiveDate) -> f64 {
    surface.eval(spot / pos.strike, pos.ttm(date)).max(VOL_FLOOR)
}

fn surface_mark(surface: &SplineSurface, spot: f64, pos: &Position, date: NaiveDate, rate: f64) -> Result<f64, CliError> {
    let vol = surface_vol(surface, spot, pos, date);
    Ok(call_price(&BsmInputs::new(spot, pos.strike, rate, pos.ttm(date), vol))?)
}

pub struct ModelDay {
    pub model: Model,
    pub seed: u64,
    pub outcome: PnlOutcome,
    pub reports: Vec<VarReport>,
}

pub struct DayOutput {
    pub as_of: NaiveDate,
    pub date: NaiveDate,
    pub realized: f64,
    pub positions: usize,
    pub marked_to_surface: usize,
    pub models: Vec<ModelDay>,
}

struct RunContext<'a> {
    cfg: &'a RunConfig,
    inputs: &'a Inputs,
    surfaces: &'a [SplineSurface],
    portfolio: &'a [Position],
}

/// Forecast for `inputs.raw[day]` made on the previous trading day.
fn run_day(ctx: &RunContext<'_>, day: usize) -> Result<Option<DayOutput>, CliError> {
    let cfg = ctx.cfg;
    let chain_t = &ctx.inputs.raw[day - 1];
    let chain_next = &ctx.inputs.raw[day];
    let (as_of, date) = (chain_t.quote_date, chain_next.quote_date);
    let spot_t = chain_t.spot().expect("checked on load");
    let spot_next = chain_next.spot().expect("checked on load");
    let surface_t = &ctx.surfaces[day - 1];
    let surface_next = &ctx.surfaces[day];
    let rate = cfg.market.risk_free_rate;

    let active: Vec<Position> = ctx
        .portfolio
        .iter()
        .filter(|p| p.survives_next_day(as_of) && p.expiry > date)
        .map(|p| Position {
            entry_vol: surface_vol(surface_t, spot_t, p, as_of),
            ..*p
        })
        .collect();
    if active.is_empty() {
        log::warn!("no live positions on {as_of}; skipping {date}");
        return Ok(None);
    }

    let mut realized = 0.0;
    let mut marked_to_surface = 0;
    for p in &active {
        let change = match (chain_t.find(p.expiry, p.strike), chain_next.find(p.expiry, p.strike)) {
            (Some(a), Some(b)) => b.mid() - a.mid(),
            _ => {
                marked_to_surface += 1;
                surface_mark(surface_next, spot_next, p, date, rate)? - surface_mark(surface_t, spot_t, p, as_of, rate)?
            }
        };
        realized += p.quantity * change;
    }

    let seed = day_seed(cfg.seed, day);
    let gbm = GbmParams::from_market(&cfg.market, cfg.simulation.sigma, cfg.simulation.n_paths, seed)?;
    let models = cfg
        .models
        .iter()
        .map(|&model| {
            let settings = SimulationSettings {
                gbm,
                weights: cfg.weights.clone(),
                pairing: cfg.simulation.pairing,
                spot_mode: match model {
                    Model::Psp => SpotMode::Simulated,
                    _ => cfg.simulation.benchmark_spot,
                },
            };
            let outcome = match model {
                Model::Psp => psp_pnl(&active, &ctx.surfaces[..day], chain_t, &settings, &cfg.market)?,
                Model::ConstVol => const_vol_pnl(&active, chain_t, &settings, &cfg.market)?,
                Model::Vix => {
                    let vix = ctx.inputs.vix.as_ref().expect("loaded when the vix model is enabled");
                    vix_pnl(&active, chain_t, vix, cfg.vix_shock, &settings, &cfg.market)?
                }
            };
            let reports = cfg
                .confidence_levels
                .iter()
                .map(|&l| var_report(&outcome.distribution, l))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ModelDay {
                model,
                seed,
                outcome,
                reports,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    Ok(Some(DayOutput {
        as_of,
        date,
        realized,
        positions: active.len(),
        marked_to_surface,
        models,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub model: Model,
    pub vol_floors: usize,
    pub clamps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub surfaces: Vec<SurfaceDiagnostics>,
    pub models: Vec<ModelDiagnostics>,
    pub skipped_days: Vec<NaiveDate>,
    /// Position-days whose realized change used surface marks because a
    /// market quote was missing.
    pub marked_to_surface: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config: RunConfig,
    pub models: Vec<Model>,
    pub confidence_levels: Vec<f64>,
    pub forecast_dates: Vec<NaiveDate>,
    pub portfolio: Vec<Position>,
    pub diagnostics: RunDiagnostics,
}

impl Manifest {
    pub fn load(run_dir: &Path) -> Result<Self, CliError> {
        let path = run_dir.join(MANIFEST);
        if !path.exists() {
            return Err(CliError::io(&path, "run manifest is missing; is this a completed run directory?"));
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(&path, e))
    }
}

#[derive(Debug, Serialize)]
struct PnlMeta<'a> {
    model: Model,
    as_of: NaiveDate,
    date: NaiveDate,
    seed: u64,
    n_paths: usize,
    n_samples: usize,
    positions: usize,
    weights: &'a psp_core::psp::WeightScheme,
    pairing: psp_core::psp::Pairing,
    vol_floors: usize,
    clamps: usize,
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn csv_bytes(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        wtr.write_record(r).map_err(|e| CliError::io(path, e))?;
    }
    wtr.into_inner().map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    write_bytes(path, &csv_bytes(path, header, rows)?)
}

pub fn surface_path(run_dir: &Path, date: NaiveDate) -> PathBuf {
    run_dir.join("surfaces").join(format!("{date}.json"))
}

pub fn pnl_path(run_dir: &Path, model: Model, date: NaiveDate) -> PathBuf {
    run_dir.join("pnl").join(model.name()).join(format!("{date}.csv"))
}

pub fn daily_path(run_dir: &Path, model: Model) -> PathBuf {
    run_dir.join("daily").join(format!("{}.csv", model.name()))
}

pub fn risk_path(run_dir: &Path, model: Model) -> PathBuf {
    run_dir.join("risk").join(format!("{}.json", model.name()))
}

pub fn write_surfaces(run_dir: &Path, fitted: &[FittedSurface]) -> Result<(), CliError> {
    for f in fitted {
        let path = surface_path(run_dir, f.surface.fit_date());
        let mut text = f.surface.to_json()?;
        text.push('\n');
        write_bytes(&path, text.as_bytes())?;
    }
    Ok(())
}

/// Loads, filters and fits; writes `surfaces/` only.
pub fn fit_only(cfg: &RunConfig) -> Result<Vec<FittedSurface>, CliError> {
    let inputs = load_inputs(cfg)?;
    let fitted = fit_surfaces(&inputs.filtered, cfg)?;
    write_surfaces(&cfg.paths.output_dir, &fitted)?;
    Ok(fitted)
}

pub struct RunSummary {
    pub output_dir: PathBuf,
    pub forecast_days: usize,
    pub report: BacktestReport,
    pub warnings: Vec<String>,
}

fn warnings(diag: &RunDiagnostics) -> Vec<String> {
    let mut out = Vec::new();
    for m in &diag.models {
        if m.vol_floors > 0 {
            out.push(format!("{}: {} volatility evaluations floored at {VOL_FLOOR}", m.model, m.vol_floors));
        }
        if m.clamps > 0 {
            out.push(format!("{}: {} surface lookups clamped to the knot domain", m.model, m.clamps));
        }
    }
    let arb: usize = diag.surfaces.iter().map(|s| s.arbitrage_violations).sum();
    if arb > 0 {
        let days = diag.surfaces.iter().filter(|s| s.arbitrage_violations > 0).count();
        out.push(format!("static arbitrage diagnostics flagged {arb} grid checks on {days} surfaces"));
    }
    let failures: usize = diag.surfaces.iter().map(|s| s.inversion_failures).sum();
    if failures > 0 {
        out.push(format!("{failures} quotes could not be inverted to an implied volatility"));
    }
    if !diag.skipped_days.is_empty() {
        out.push(format!("{} days skipped with no live positions", diag.skipped_days.len()));
    }
    if diag.marked_to_surface > 0 {
        out.push(format!(
            "{} position-days marked to the surface for lack of quotes",
            diag.marked_to_surface
        ));
    }
    out
}

/// Full pipeline: fit, forecast every day, persist, then backtest.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let n = inputs.raw.len();
    if n < 3 {
        return Err(CliError::Numeric(psp_core::Error::InsufficientHistory {
            needed: 3,
            available: n,
        }));
    }
    let fitted = fit_surfaces(&inputs.filtered, cfg)?;
    let surfaces: Vec<SplineSurface> = fitted.iter().map(|f| f.surface.clone()).collect();
    let portfolio = select_portfolio(&inputs.filtered[0], cfg)?;
    let ctx = RunContext {
        cfg,
        inputs: &inputs,
        surfaces: &surfaces,
        portfolio: &portfolio,
    };
    let days = (2..n)
        .into_par_iter()
        .map(|day| run_day(&ctx, day).map(|out| (inputs.raw[day].quote_date, out)))
        .collect::<Result<Vec<_>, CliError>>()?;

    let run_dir = cfg.paths.output_dir.as_path();
    write_surfaces(run_dir, &fitted)?;

    let skipped_days: Vec<NaiveDate> = days.iter().filter(|(_, d)| d.is_none()).map(|(d, _)| *d).collect();
    let outputs: Vec<&DayOutput> = days.iter().filter_map(|(_, d)| d.as_ref()).collect();
    let labels: Vec<String> = cfg.confidence_levels.iter().map(|l| level_label(*l)).collect();

    let mut model_diag = Vec::new();
    for (mi, &model) in cfg.models.iter().enumerate() {
        let mut risk = Vec::new();
        let mut rows = Vec::new();
        let (mut floors, mut clamps) = (0, 0);
        for day in &outputs {
            let md = &day.models[mi];
            floors += md.outcome.vol_floors;
            clamps += md.outcome.clamps;

            let path = pnl_path(run_dir, model, day.date);
            let mut buf = Vec::new();
            md.outcome.distribution.write_csv(&mut buf)?;
            write_bytes(&path, &buf)?;
            write_json(
                &path.with_extension("meta.json"),
                &PnlMeta {
                    model,
                    as_of: day.as_of,
                    date: day.date,
                    seed: md.seed,
                    n_paths: cfg.simulation.n_paths,
                    n_samples: md.outcome.distribution.len(),
                    positions: day.positions,
                    weights: &cfg.weights,
                    pairing: cfg.simulation.pairing,
                    vol_floors: md.outcome.vol_floors,
                    clamps: md.outcome.clamps,
                },
            )?;

            let mut row = vec![day.date.to_string(), day.realized.to_string()];
            row.extend(md.reports.iter().map(|r| r.var.to_string()));
            row.extend(md.reports.iter().map(|r| ((day.realized < -r.var) as u8).to_string()));
            rows.push(row);
            risk.extend(md.reports.iter().copied());
        }
        write_json(&risk_path(run_dir, model), &risk)?;
        let mut header = vec!["date".to_string(), "return".to_string()];
        header.extend(labels.iter().map(|l| format!("var_{l}")));
        header.extend(labels.iter().map(|l| format!("hit_{l}")));
        write_csv(&daily_path(run_dir, model), &header, &rows)?;
        model_diag.push(ModelDiagnostics {
            model,
            vol_floors: floors,
            clamps,
        });
    }

    let diagnostics = RunDiagnostics {
        surfaces: fitted.iter().map(|f| f.diagnostics.clone()).collect(),
        models: model_diag,
        skipped_days,
        marked_to_surface: outputs.iter().map(|d| d.marked_to_surface).sum(),
    };
    let warnings = warnings(&diagnostics);
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        models: cfg.models.clone(),
        confidence_levels: cfg.confidence_levels.clone(),
        forecast_dates: outputs.iter().map(|d| d.date).collect(),
        portfolio,
        diagnostics,
    };
    write_json(&run_dir.join(MANIFEST), &manifest)?;
    let report = run_backtest(run_dir)?;
    Ok(RunSummary {
        output_dir: run_dir.to_path_buf(),
        forecast_days: outputs.len(),
        report,
        warnings,
    })
}
