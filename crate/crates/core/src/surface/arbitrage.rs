//! Static arbitrage diagnostics on a fitted surface. Advisory only.

use serde::{Deserialize, Serialize};

use super::SplineSurface;
use crate::bsm::{call_price, BsmInputs};

const CALENDAR_TOL: f64 = 1e-12;
const BUTTERFLY_TOL: f64 = 1e-10;

/// Sample grid for the diagnostics. `forward_moneyness` values are `F / K`
/// with `F = S e^{r tau}`; `ttm` values are in years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticGrid {
    pub forward_moneyness: Vec<f64>,
    pub ttm: Vec<f64>,
}

impl DiagnosticGrid {
    /// Evenly spaced grid over the surface domain.
    pub fn uniform(surface: &SplineSurface, n_m: usize, n_t: usize) -> Self {
        let ((m_lo, m_hi), (t_lo, t_hi)) = surface.domain();
        let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64)
                .collect()
        };
        Self {
            forward_moneyness: lin(m_lo, m_hi, n_m),
            ttm: lin(t_lo, t_hi, n_t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarViolation {
    pub forward_moneyness: f64,
    pub ttm_short: f64,
    pub ttm_long: f64,
    pub total_var_short: f64,
    pub total_var_long: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ButterflyViolation {
    pub ttm: f64,
    pub strikes: [f64; 3],
    pub prices: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArbitrageReport {
    pub calendar: Vec<CalendarViolation>,
    pub butterfly: Vec<ButterflyViolation>,
}

impl ArbitrageReport {
    pub fn is_clean(&self) -> bool {
        self.calendar.is_empty() && self.butterfly.is_empty()
    }

    pub fn violation_count(&self) -> usize {
        self.calendar.len() + self.butterfly.len()
    }
}

/// Total variance `sigma^2 tau` must not decrease with maturity. `slices` are
/// `(tau, sigma)` pairs at one forward moneyness, in any order.
pub fn calendar_violations(forward_moneyness: f64, slices: &[(f64, f64)]) -> Vec<CalendarViolation> {
    let mut sorted = slices.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted
        .windows(2)
        .filter_map(|w| {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            let (w0, w1) = (v0 * v0 * t0, v1 * v1 * t1);
            (w1 < w0 - CALENDAR_TOL).then_some(CalendarViolation {
                forward_moneyness,
                ttm_short: t0,
                ttm_long: t1,
                total_var_short: w0,
                total_var_long: w1,
            })
        })
        .collect()
}

/// Call prices must be convex in strike. Checks every consecutive triple of
/// the strike-sorted `(strike, price)` pairs with non-uniform spacing.
pub fn butterfly_violations(ttm: f64, quotes: &[(f64, f64)]) -> Vec<ButterflyViolation> {
    let mut sorted = quotes.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted
        .windows(3)
        .filter_map(|w| {
            let (k0, c0) = w[0];
            let (k1, c1) = w[1];
            let (k2, c2) = w[2];
            let left = (c1 - c0) / (k1 - k0);
            let right = (c2 - c1) / (k2 - k1);
            let scale = c0.abs().max(c2.abs()).max(1.0);
            (right < left - BUTTERFLY_TOL * scale).then_some(ButterflyViolation {
                ttm,
                strikes: [k0, k1, k2],
                prices: [c0, c1, c2],
            })
        })
        .collect()
}

/// Calendar and butterfly checks of `surface` on `grid` for spot `spot` and
/// rate `rate`.
pub fn static_arbitrage_diagnostics(
    surface: &SplineSurface,
    grid: &DiagnosticGrid,
    spot: f64,
    rate: f64,
) -> ArbitrageReport {
    let vol_at = |fwd_m: f64, tau: f64| {
        let m = fwd_m * (-rate * tau).exp();
        surface.eval(m, tau).max(crate::VOL_FLOOR)
    };
    let mut report = ArbitrageReport::default();
    for &x in &grid.forward_moneyness {
        let slices: Vec<_> = grid.ttm.iter().map(|&t| (t, vol_at(x, t))).collect();
        report.calendar.extend(calendar_violations(x, &slices));
    }
    for &tau in &grid.ttm {
        let quotes: Vec<_> = grid
            .forward_moneyness
            .iter()
            .filter_map(|&x| {
                let strike = spot * (rate * tau).exp() / x;
                let vol = vol_at(x, tau);
                call_price(&BsmInputs::new(spot, strike, rate, tau, vol))
                    .ok()
                    .map(|p| (strike, p))
            })
            .collect();
        report.butterfly.extend(butterfly_violations(tau, &quotes));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{fit_surface, KnotLayout, VolPoint};
    use chrono::NaiveDate;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 1, 3).unwrap()
    }

    fn knots() -> (Vec<f64>, Vec<f64>) {
        (
            KnotLayout::new(0.7, 1.3, 8).unwrap().knots(),
            KnotLayout::new(0.1, 2.0, 8).unwrap().knots(),
        )
    }

    #[test]
    fn flat_surface_is_clean() {
        let (km, kt) = knots();
        let s = SplineSurface::constant(day(), km, kt, 0.2).unwrap();
        let grid = DiagnosticGrid::uniform(&s, 15, 12);
        let report = static_arbitrage_diagnostics(&s, &grid, 100.0, 0.02);
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn falling_total_variance_is_flagged() {
        let v = calendar_violations(1.0, &[(0.5, 0.4), (1.0, 0.2)]);
        assert_eq!(v.len(), 1);
        assert!((v[0].total_var_short - 0.08).abs() < 1e-15);
        assert!((v[0].total_var_long - 0.04).abs() < 1e-15);
    }

    #[test]
    fn surface_with_inverted_term_structure_is_flagged() {
        let (km, kt) = knots();
        // sigma = 0.6 - 0.4 tau: 0.4 at half a year, 0.2 at one year.
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                let m = 0.7 + 0.6 * i as f64 / 19.0;
                let t = 0.1 + 1.9 * j as f64 / 19.0;
                pts.push(VolPoint::new(m, t, (0.6 - 0.4 * t).max(0.05)).unwrap());
            }
        }
        let s = fit_surface(&pts, &km, &kt, 0.0, day()).unwrap();
        let grid = DiagnosticGrid {
            forward_moneyness: vec![1.0],
            ttm: vec![0.5, 1.0],
        };
        let report = static_arbitrage_diagnostics(&s, &grid, 100.0, 0.0);
        assert_eq!(report.calendar.len(), 1);
        assert!(report.calendar[0].total_var_short > report.calendar[0].total_var_long);
    }

    #[test]
    fn convex_stencil_passes_and_concave_fails() {
        assert!(butterfly_violations(1.0, &[(90.0, 5.0), (100.0, 3.0), (110.0, 2.0)]).is_empty());
        assert_eq!(
            butterfly_violations(1.0, &[(90.0, 5.0), (100.0, 4.5), (110.0, 2.0)]).len(),
            1
        );
    }
}
