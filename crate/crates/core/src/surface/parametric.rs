//! Polynomial and SVI smile representations, kept for comparison with the
//! spline surface.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coefficients of the quadratic-in-moneyness, linear-in-maturity polynomial
/// `a0 + a1 M + a2 M^2 + a3 tau + a4 M tau`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolyParams {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

/// Normalized forward moneyness `ln(F / K) / sqrt(tau)` with `F = S e^{r tau}`.
pub fn forward_moneyness(spot: f64, strike: f64, rate: f64, ttm: f64) -> f64 {
    ((spot / strike).ln() + rate * ttm) / ttm.sqrt()
}

pub fn eval_poly(p: &PolyParams, spot: f64, strike: f64, rate: f64, ttm: f64) -> Result<f64> {
    if !(ttm > 0.0) {
        return Err(Error::Domain(format!("time to maturity must be positive, got {ttm}")));
    }
    let m = forward_moneyness(spot, strike, rate, ttm);
    Ok(p.a0 + p.a1 * m + p.a2 * m * m + p.a3 * ttm + p.a4 * m * ttm)
}

/// SVI variance parameters. The square-root term reads `(k x - m)`, so
/// `k = 1` gives the usual raw SVI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviParams {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub m: f64,
    pub s: f64,
    pub k: f64,
}

impl SviParams {
    pub fn new(a: f64, b: f64, rho: f64, m: f64, s: f64, k: f64) -> Result<Self> {
        if !(b >= 0.0) || !(rho.abs() <= 1.0) || !(s >= 0.0) {
            return Err(Error::validation(format!(
                "SVI needs b >= 0, |rho| <= 1, s >= 0; got b={b} rho={rho} s={s}"
            )));
        }
        if ![a, m, k].iter().all(|v| v.is_finite()) {
            return Err(Error::validation("SVI parameters must be finite"));
        }
        Ok(Self { a, b, rho, m, s, k })
    }
}

/// Implied variance `a + b (rho (x - m) + sqrt((k x - m)^2 + s^2))`.
pub fn eval_svi(p: &SviParams, x: f64) -> f64 {
    p.a + p.b * (p.rho * (x - p.m) + ((p.k * x - p.m).powi(2) + p.s * p.s).sqrt())
}
