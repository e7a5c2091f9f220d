//! Implied volatility surfaces.
//!
//! The working representation is a tensor-product cubic B-spline over spot
//! moneyness `m = S / K` and time to maturity `tau` (years):
//!
//! ```text
//! sigma(m, tau) = sum_i sum_j beta_ij B_i(m) B_j(tau)
//! ```
//!
//! Every day is fitted on the same knot layout so that day-over-day
//! movements live in one coefficient space. Coefficients are snapped to a
//! binary lattice of spacing 2^-40; on that lattice differences and sums of
//! coefficient grids are exact, so a [`SurfaceDelta`] applied to the surface
//! it was taken from reproduces the other surface bit for bit.

mod arbitrage;
pub mod bspline;
mod parametric;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bsm::implied_vol;
use crate::market_data::{MarketParams, OptionChain};
use crate::{Error, Result};

pub use arbitrage::{
    butterfly_violations, calendar_violations, static_arbitrage_diagnostics, ArbitrageReport,
    ButterflyViolation, CalendarViolation, DiagnosticGrid,
};
pub use bspline::{bspline_basis, KnotLayout};
pub use parametric::{eval_poly, eval_svi, forward_moneyness, PolyParams, SviParams};

use bspline::{domain, nonzero_basis, DEGREE, MIN_KNOTS};

const COEFF_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;
/// Coefficients must stay below this magnitude to remain on the lattice.
const COEFF_LIMIT: f64 = 4096.0;
/// Relative eigenvalue floor of the normal equations.
const CONDITION_LIMIT: f64 = 1e12;

fn snap(c: f64) -> f64 {
    (c / COEFF_QUANTUM).round() * COEFF_QUANTUM
}

/// One implied volatility observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolPoint {
    /// Spot moneyness `S / K`.
    pub moneyness: f64,
    /// Time to maturity in years.
    pub ttm: f64,
    pub vol: f64,
}

impl VolPoint {
    pub fn new(moneyness: f64, ttm: f64, vol: f64) -> Result<Self> {
        if !(moneyness > 0.0 && ttm > 0.0 && vol > 0.0)
            || !(moneyness.is_finite() && ttm.is_finite() && vol.is_finite())
        {
            return Err(Error::validation(format!(
                "vol point needs positive finite fields, got m={moneyness} tau={ttm} vol={vol}"
            )));
        }
        Ok(Self { moneyness, ttm, vol })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SurfaceRecord", into = "SurfaceRecord")]
pub struct SplineSurface {
    fit_date: NaiveDate,
    knots_m: Vec<f64>,
    knots_t: Vec<f64>,
    /// Row-major, `n_m` rows (moneyness) by `n_t` columns (maturity).
    coeffs: Vec<f64>,
    residual_norm: f64,
}

/// On-disk form of a [`SplineSurface`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SurfaceRecord {
    fit_date: NaiveDate,
    knots_m: Vec<f64>,
    knots_t: Vec<f64>,
    coeffs: Vec<f64>,
    residual_norm: f64,
}

impl TryFrom<SurfaceRecord> for SplineSurface {
    type Error = Error;
    fn try_from(r: SurfaceRecord) -> Result<Self> {
        let mut s = SplineSurface::new(r.fit_date, r.knots_m, r.knots_t, r.coeffs)?;
        s.residual_norm = r.residual_norm;
        Ok(s)
    }
}

impl From<SplineSurface> for SurfaceRecord {
    fn from(s: SplineSurface) -> Self {
        Self {
            fit_date: s.fit_date,
            knots_m: s.knots_m,
            knots_t: s.knots_t,
            coeffs: s.coeffs,
            residual_norm: s.residual_norm,
        }
    }
}

fn validate_knots(knots: &[f64], axis: &str) -> Result<()> {
    if knots.len() < MIN_KNOTS {
        return Err(Error::validation(format!(
            "{axis} axis needs at least {MIN_KNOTS} knots, got {}",
            knots.len()
        )));
    }
    if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::validation(format!("{axis} knots must be finite and nondecreasing")));
    }
    let (lo, hi) = domain(knots);
    if !(lo < hi) {
        return Err(Error::validation(format!("{axis} knot domain is empty")));
    }
    Ok(())
}

impl SplineSurface {
    pub fn new(
        fit_date: NaiveDate,
        knots_m: Vec<f64>,
        knots_t: Vec<f64>,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        validate_knots(&knots_m, "moneyness")?;
        validate_knots(&knots_t, "maturity")?;
        let expected = (knots_m.len() - DEGREE - 1) * (knots_t.len() - DEGREE - 1);
        if coeffs.len() != expected {
            return Err(Error::validation(format!(
                "expected {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite() || c.abs() >= COEFF_LIMIT) {
            return Err(Error::validation(format!("coefficient {c} is out of range")));
        }
        Ok(Self {
            fit_date,
            knots_m,
            knots_t,
            coeffs: coeffs.into_iter().map(snap).collect(),
            residual_norm: 0.0,
        })
    }

    /// Surface equal to `value` everywhere on the layout.
    pub fn constant(fit_date: NaiveDate, knots_m: Vec<f64>, knots_t: Vec<f64>, value: f64) -> Result<Self> {
        let n = (knots_m.len().saturating_sub(DEGREE + 1)) * (knots_t.len().saturating_sub(DEGREE + 1));
        Self::new(fit_date, knots_m, knots_t, vec![value; n])
    }

    pub fn fit_date(&self) -> NaiveDate {
        self.fit_date
    }

    pub fn knots_m(&self) -> &[f64] {
        &self.knots_m
    }

    pub fn knots_t(&self) -> &[f64] {
        &self.knots_t
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    pub fn n_m(&self) -> usize {
        self.knots_m.len() - DEGREE - 1
    }

    pub fn n_t(&self) -> usize {
        self.knots_t.len() - DEGREE - 1
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.coeffs[i * self.n_t() + j]
    }

    /// `(moneyness, maturity)` domain of the surface.
    pub fn domain(&self) -> ((f64, f64), (f64, f64)) {
        (domain(&self.knots_m), domain(&self.knots_t))
    }

    pub fn same_layout(&self, other: &SplineSurface) -> bool {
        self.knots_m == other.knots_m && self.knots_t == other.knots_t
    }

    /// Whether `(m, tau)` lies outside the domain and would be clamped.
    pub fn is_clamped(&self, m: f64, tau: f64) -> bool {
        let ((m_lo, m_hi), (t_lo, t_hi)) = self.domain();
        m < m_lo || m > m_hi || tau < t_lo || tau > t_hi
    }

    /// Surface value at `(m, tau)`; points outside the domain are clamped to it.
    pub fn eval(&self, m: f64, tau: f64) -> f64 {
        let (im, bm) = nonzero_basis(&self.knots_m, m);
        let (it, bt) = nonzero_basis(&self.knots_t, tau);
        let n_t = self.n_t();
        let mut total = 0.0;
        for (a, wm) in bm.iter().enumerate() {
            let row = &self.coeffs[(im + a) * n_t + it..(im + a) * n_t + it + DEGREE + 1];
            let inner: f64 = row.iter().zip(bt.iter()).map(|(c, wt)| c * wt).sum();
            total += wm * inner;
        }
        total
    }

    /// Adds a coefficient delta, producing the shifted surface dated
    /// `delta.to_date`.
    pub fn apply_delta(&self, delta: &SurfaceDelta) -> Result<SplineSurface> {
        self.shifted(delta, delta.to_date)
    }

    /// Adds a coefficient delta while keeping an explicit date.
    pub fn shifted(&self, delta: &SurfaceDelta, fit_date: NaiveDate) -> Result<SplineSurface> {
        if delta.n_m != self.n_m() || delta.n_t != self.n_t() {
            return Err(Error::KnotMismatch(format!(
                "delta is {}x{}, surface is {}x{}",
                delta.n_m,
                delta.n_t,
                self.n_m(),
                self.n_t()
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&delta.dcoeffs)
            .map(|(c, d)| c + d)
            .collect();
        SplineSurface::new(fit_date, self.knots_m.clone(), self.knots_t.clone(), coeffs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Coefficient-space difference between two surfaces on one layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDelta {
    pub from_date: NaiveDate,
    pub to_date: NaiveDate,
    pub n_m: usize,
    pub n_t: usize,
    /// Row-major like [`SplineSurface::coeffs`].
    pub dcoeffs: Vec<f64>,
}

impl SurfaceDelta {
    pub fn zero(from_date: NaiveDate, to_date: NaiveDate, n_m: usize, n_t: usize) -> Self {
        Self::uniform(from_date, to_date, n_m, n_t, 0.0)
    }

    /// The same shift on every coefficient, which moves the surface by
    /// `shift` everywhere on its domain.
    pub fn uniform(from_date: NaiveDate, to_date: NaiveDate, n_m: usize, n_t: usize, shift: f64) -> Self {
        Self {
            from_date,
            to_date,
            n_m,
            n_t,
            dcoeffs: vec![shift; n_m * n_t],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.dcoeffs.iter().all(|d| *d == 0.0)
    }
}

/// `today - yesterday` in coefficient space.
pub fn surface_delta(today: &SplineSurface, yesterday: &SplineSurface) -> Result<SurfaceDelta> {
    if !today.same_layout(yesterday) {
        return Err(Error::KnotMismatch(format!(
            "surfaces dated {} and {} use different knots",
            yesterday.fit_date, today.fit_date
        )));
    }
    Ok(SurfaceDelta {
        from_date: yesterday.fit_date,
        to_date: today.fit_date,
        n_m: today.n_m(),
        n_t: today.n_t(),
        dcoeffs: today
            .coeffs
            .iter()
            .zip(&yesterday.coeffs)
            .map(|(t, y)| t - y)
            .collect(),
    })
}

/// Least-squares tensor-product fit.
///
/// Minimizes `sum (vol - s(m, tau))^2 + ridge * |beta - vbar|^2` where
/// `vbar` is the mean observed vol: the ridge pulls unsupported
/// coefficients towards the average level rather than to zero, and leaves
/// constant data reproduced exactly. With `ridge == 0` a rank-deficient
/// system is an [`Error::IllConditioned`]. Points outside the knot domain are
/// clamped onto its boundary.
pub fn fit_surface(
    points: &[VolPoint],
    knots_m: &[f64],
    knots_t: &[f64],
    ridge: f64,
    fit_date: NaiveDate,
) -> Result<SplineSurface> {
    validate_knots(knots_m, "moneyness")?;
    validate_knots(knots_t, "maturity")?;
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::validation(format!("ridge must be >= 0, got {ridge}")));
    }
    if points.is_empty() {
        return Err(Error::IllConditioned {
            condition: f64::INFINITY,
        });
    }
    let n_m = knots_m.len() - DEGREE - 1;
    let n_t = knots_t.len() - DEGREE - 1;
    let n = n_m * n_t;

    let mut normal = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut idx = [0usize; 16];
    let mut w = [0.0f64; 16];
    for p in points {
        let (im, bm) = nonzero_basis(knots_m, p.moneyness);
        let (it, bt) = nonzero_basis(knots_t, p.ttm);
        for a in 0..=DEGREE {
            for b in 0..=DEGREE {
                idx[a * 4 + b] = (im + a) * n_t + it + b;
                w[a * 4 + b] = bm[a] * bt[b];
            }
        }
        for r in 0..16 {
            rhs[idx[r]] += w[r] * p.vol;
            for c in 0..16 {
                normal[(idx[r], idx[c])] += w[r] * w[c];
            }
        }
    }
    let mean_vol = points.iter().map(|p| p.vol).sum::<f64>() / points.len() as f64;
    for k in 0..n {
        normal[(k, k)] += ridge;
        rhs[k] += ridge * mean_vol;
    }

    let eig = nalgebra::SymmetricEigen::new(normal.clone());
    let max_eig = eig.eigenvalues.max();
    let min_eig = eig.eigenvalues.min();
    if !(max_eig > 0.0) || min_eig <= max_eig / CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            condition: if min_eig > 0.0 { max_eig / min_eig } else { f64::INFINITY },
        });
    }
    let chol = normal.cholesky().ok_or(Error::IllConditioned {
        condition: max_eig / min_eig,
    })?;
    let beta = chol.solve(&rhs);

    let mut surface = SplineSurface::new(
        fit_date,
        knots_m.to_vec(),
        knots_t.to_vec(),
        beta.iter().copied().collect(),
    )?;
    surface.residual_norm = points
        .iter()
        .map(|p| (p.vol - surface.eval(p.moneyness, p.ttm)).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(surface)
}

/// Implied volatility points of a chain.
#[derive(Debug, Clone, Default)]
pub struct ChainPoints {
    pub points: Vec<VolPoint>,
    /// Quotes whose mid could not be inverted.
    pub inversion_failures: usize,
    /// Quotes outside the `(moneyness, maturity)` window.
    pub out_of_range: usize,
}

/// Inverts every quote mid of `chain` and keeps the points inside
/// `moneyness_range x ttm_range`.
pub fn chain_points(
    chain: &OptionChain,
    params: &MarketParams,
    moneyness_range: (f64, f64),
    ttm_range: (f64, f64),
) -> ChainPoints {
    let mut out = ChainPoints::default();
    for q in &chain.quotes {
        let (m, tau) = (q.moneyness(), q.ttm());
        if m < moneyness_range.0 || m > moneyness_range.1 || tau < ttm_range.0 || tau > ttm_range.1 {
            out.out_of_range += 1;
            continue;
        }
        match implied_vol(q.mid(), q.underlying_price, q.strike, params.risk_free_rate, tau)
            .and_then(|vol| VolPoint::new(m, tau, vol))
        {
            Ok(p) => out.points.push(p),
            Err(_) => out.inversion_failures += 1,
        }
    }
    out
}
