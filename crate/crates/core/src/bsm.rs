//! Black-Scholes-Merton European call pricing and implied volatility.
//!
//! Pricing carries no dividend yield: the dividend yield only enters the
//! drift of the simulated underlying.

use libm::erfc;

use crate::{Error, Result};

/// Absolute price tolerance of the implied volatility solver, relative to spot.
pub const IV_PRICE_TOLERANCE: f64 = 1e-10;
/// Maximum iterations of the implied volatility solver.
pub const IV_MAX_ITERATIONS: usize = 200;
/// Implied volatility search bracket.
pub const IV_BRACKET: (f64, f64) = (1e-9, 5.0);

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Model-free lower bound of a European call, `max(S - K e^{-r tau}, 0)`.
pub fn call_lower_bound(spot: f64, strike: f64, rate: f64, ttm: f64) -> f64 {
    (spot - strike * (-rate * ttm).exp()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsmInputs {
    pub spot: f64,
    pub strike: f64,
    /// Annualized continuously compounded rate.
    pub rate: f64,
    /// Time to maturity in years.
    pub ttm: f64,
    /// Annualized volatility.
    pub vol: f64,
}

impl BsmInputs {
    pub fn new(spot: f64, strike: f64, rate: f64, ttm: f64, vol: f64) -> Self {
        Self {
            spot,
            strike,
            rate,
            ttm,
            vol,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.ttm > 0.0) || !self.ttm.is_finite() {
            return Err(Error::Domain(format!(
                "time to maturity must be positive, got {}",
                self.ttm
            )));
        }
        if !(self.spot > 0.0) || !(self.strike > 0.0) {
            return Err(Error::Domain(format!(
                "spot and strike must be positive, got S={} K={}",
                self.spot, self.strike
            )));
        }
        if !(self.vol >= 0.0) || !self.vol.is_finite() || !self.rate.is_finite() {
            return Err(Error::Domain(format!(
                "invalid volatility or rate: vol={} r={}",
                self.vol, self.rate
            )));
        }
        Ok(())
    }
}

/// European call price `N(d1) S - N(d2) K e^{-r tau}`.
///
/// A zero volatility returns the intrinsic limit. The result is kept inside
/// the no-arbitrage envelope `[max(S - K e^{-r tau}, 0), S]`.
pub fn call_price(inputs: &BsmInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(price_unchecked(inputs))
}

fn price_unchecked(inputs: &BsmInputs) -> f64 {
    let BsmInputs {
        spot,
        strike,
        rate,
        ttm,
        vol,
    } = *inputs;
    let discounted_strike = strike * (-rate * ttm).exp();
    let lower = (spot - discounted_strike).max(0.0);
    let total_vol = vol * ttm.sqrt();
    if total_vol == 0.0 {
        return lower;
    }
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * ttm) / total_vol;
    let d2 = d1 - total_vol;
    let price = norm_cdf(d1) * spot - norm_cdf(d2) * discounted_strike;
    price.clamp(lower, spot)
}

/// Inverts [`call_price`] for volatility.
///
/// Bisection-safeguarded secant on [`IV_BRACKET`]. The returned volatility
/// reprices to within `IV_PRICE_TOLERANCE * spot`.
pub fn implied_vol(price: f64, spot: f64, strike: f64, rate: f64, ttm: f64) -> Result<f64> {
    let base = BsmInputs::new(spot, strike, rate, ttm, 0.0);
    base.validate()?;
    if !price.is_finite() {
        return Err(Error::Domain(format!("price must be finite, got {price}")));
    }
    let bound = call_lower_bound(spot, strike, rate, ttm);
    if price <= bound {
        return Err(Error::BelowIntrinsic { price, bound });
    }
    if price >= spot {
        return Err(Error::AboveUpperBound { price, spot });
    }

    let objective = |vol: f64| price_unchecked(&BsmInputs { vol, ..base }) - price;
    let accept = IV_PRICE_TOLERANCE * spot;
    // Keep iterating well past the acceptance tolerance; the secant steps are
    // cheap near the root and a tight price match keeps the vol accurate when
    // vega is small.
    let tight = 1e-15 * spot;

    let (mut lo, mut hi) = IV_BRACKET;
    let mut f_lo = objective(lo);
    let f_hi = objective(hi);
    if f_lo >= 0.0 {
        return if f_lo.abs() <= accept {
            Ok(lo)
        } else {
            Err(Error::NoConvergence { iterations: 0 })
        };
    }
    if f_hi < 0.0 {
        return Err(Error::NoConvergence { iterations: 0 });
    }
    let mut f_hi = f_hi;

    let (mut x0, mut f0, mut x1, mut f1) = (lo, f_lo, hi, f_hi);
    let mut width = hi - lo;
    let mut force_bisect = false;
    for iter in 0..IV_MAX_ITERATIONS {
        let mut x = if force_bisect || f1 == f0 {
            f64::NAN
        } else {
            x1 - f1 * (x1 - x0) / (f1 - f0)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = objective(x);
        if fx.abs() <= tight || hi - lo <= 4.0 * f64::EPSILON * x {
            return finish(x, fx, accept, iter + 1);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
        let new_width = hi - lo;
        force_bisect = new_width > 0.5 * width;
        width = new_width;
        x0 = x1;
        f0 = f1;
        x1 = x;
        f1 = fx;
    }
    // Out of iterations: accept the better bracket end if it meets tolerance.
    let (x, fx) = if f_lo.abs() < f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    finish(x, fx, accept, IV_MAX_ITERATIONS)
}

fn finish(x: f64, fx: f64, accept: f64, iterations: usize) -> Result<f64> {
    if fx.abs() <= accept {
        Ok(x)
    } else {
        Err(Error::NoConvergence { iterations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn norm_cdf_reference_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert_abs_diff_eq!(norm_cdf(1.959964), 0.975, epsilon = 1e-6);
        // Phi(-8) = 6.22096057427178e-16
        assert!(norm_cdf(-8.0) < 1e-14);
        assert_abs_diff_eq!(norm_cdf(-8.0), 6.22096057427178e-16, epsilon = 1e-27);
        // Phi(1) from erf(1/sqrt 2) = 0.682689492137085897
        assert_abs_diff_eq!(norm_cdf(1.0), 0.841_344_746_068_543, epsilon = 1e-15);
    }

    #[test]
    fn norm_cdf_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for i in -400..=400 {
            let x = i as f64 * 0.025;
            let v = norm_cdf(x);
            assert!(v >= prev);
            assert_abs_diff_eq!(v + norm_cdf(-x), 1.0, epsilon = 1e-12);
            prev = v;
        }
    }

    #[test]
    fn call_price_intrinsic_limit() {
        let p = call_price(&BsmInputs::new(100.0, 80.0, 0.0, 1.0, 0.0)).unwrap();
        assert_eq!(p, 20.0);
    }

    #[test]
    fn call_price_atm_reference() {
        // N(0.1) * 100 - N(-0.1) * 100 = 100 * (2 N(0.1) - 1) = 7.965567455405804
        let p = call_price(&BsmInputs::new(100.0, 100.0, 0.0, 1.0, 0.2)).unwrap();
        assert_abs_diff_eq!(p, 7.9656, epsilon = 1e-3);
        assert_abs_diff_eq!(p, 7.965567455405804, epsilon = 1e-12);
    }

    #[test]
    fn call_on_free_stock() {
        let p = call_price(&BsmInputs::new(100.0, 1e-12, 0.03, 1.0, 0.3)).unwrap();
        assert_abs_diff_eq!(p, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn call_price_rejects_non_positive_ttm() {
        assert!(matches!(
            call_price(&BsmInputs::new(100.0, 100.0, 0.0, 0.0, 0.2)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            call_price(&BsmInputs::new(100.0, 100.0, 0.0, -1.0, 0.2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn implied_vol_round_trips() {
        let inputs = BsmInputs::new(100.0, 100.0, 0.0, 1.0, 0.2);
        let p = call_price(&inputs).unwrap();
        assert_abs_diff_eq!(implied_vol(p, 100.0, 100.0, 0.0, 1.0).unwrap(), 0.2, epsilon = 1e-8);

        let inputs = BsmInputs::new(100.0, 150.0, 0.02, 0.5, 1.5);
        let p = call_price(&inputs).unwrap();
        assert_abs_diff_eq!(implied_vol(p, 100.0, 150.0, 0.02, 0.5).unwrap(), 1.5, epsilon = 1e-8);
    }

    #[test]
    fn implied_vol_bound_errors() {
        assert!(matches!(
            implied_vol(19.99, 100.0, 80.0, 0.0, 1.0),
            Err(Error::BelowIntrinsic { .. })
        ));
        assert!(matches!(
            implied_vol(100.0, 100.0, 80.0, 0.0, 1.0),
            Err(Error::AboveUpperBound { .. })
        ));
        // 99.9 needs a volatility far beyond the bracket.
        assert!(matches!(
            implied_vol(99.9, 100.0, 100.0, 0.0, 1.0),
            Err(Error::NoConvergence { .. })
        ));
    }

    proptest! {
        #[test]
        fn price_monotone_in_vol_spot_and_strike(
            spot in 50.0..150.0f64,
            strike in 50.0..150.0f64,
            rate in 0.0..0.1f64,
            ttm in 0.05..2.0f64,
            vol in 0.01..1.0f64,
            bump in 0.001..0.5f64,
        ) {
            let base = BsmInputs::new(spot, strike, rate, ttm, vol);
            let p = call_price(&base).unwrap();
            let lower = call_lower_bound(spot, strike, rate, ttm);
            prop_assert!(p >= lower && p <= spot);
            let up_vol = call_price(&BsmInputs { vol: vol + bump, ..base }).unwrap();
            let up_spot = call_price(&BsmInputs { spot: spot + bump, ..base }).unwrap();
            let up_strike = call_price(&BsmInputs { strike: strike + bump, ..base }).unwrap();
            prop_assert!(up_vol >= p);
            prop_assert!(up_spot >= p);
            prop_assert!(up_strike <= p);
        }

        #[test]
        fn implied_vol_inverts_price(
            vol in 0.01..3.0f64,
            z in -2.0..2.0f64,
            rate in 0.0..0.05f64,
            ttm in 0.1..2.0f64,
        ) {
            let spot = 100.0;
            let strike = spot * (z * vol * ttm.sqrt()).exp();
            let p = call_price(&BsmInputs::new(spot, strike, rate, ttm, vol)).unwrap();
            let iv = implied_vol(p, spot, strike, rate, ttm).unwrap();
            prop_assert!((iv - vol).abs() < 1e-8, "vol {} recovered {}", vol, iv);
        }
    }
}
