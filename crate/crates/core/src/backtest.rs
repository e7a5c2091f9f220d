//! VaR backtesting: violation series, coverage likelihood-ratio tests,
//! Diebold-Mariano comparisons and a penalty-based ranking.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use libm::erfc;

use crate::{Error, Result};

/// Daily hits: `true` when the realized return fell below `-VaR`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationSeries {
    pub dates: Vec<NaiveDate>,
    pub hits: Vec<bool>,
    pub confidence: f64,
}

impl ViolationSeries {
    /// Undated series, mainly for fixtures.
    pub fn from_hits(hits: Vec<bool>, confidence: f64) -> Result<Self> {
        if hits.is_empty() {
            return Err(Error::EmptySamples);
        }
        let start = NaiveDate::MIN;
        let dates = (0..hits.len() as u64).map(|i| start + chrono::Days::new(i)).collect();
        Ok(Self {
            dates,
            hits,
            confidence,
        })
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.hits.iter().filter(|h| **h).count()
    }

    pub fn rate(&self) -> f64 {
        self.count() as f64 / self.len() as f64
    }
}

fn check_aligned(a: &[(NaiveDate, f64)], b: &[(NaiveDate, f64)]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Misaligned(format!("{} against {} observations", a.len(), b.len())));
    }
    if let Some(((da, _), (db, _))) = a.iter().zip(b).find(|((da, _), (db, _))| da != db) {
        return Err(Error::Misaligned(format!("date {da} paired with {db}")));
    }
    Ok(())
}

/// `hit_t = return_t < -VaR_t`, strictly.
pub fn violations(
    returns: &[(NaiveDate, f64)],
    var_forecasts: &[(NaiveDate, f64)],
    confidence: f64,
) -> Result<ViolationSeries> {
    check_aligned(returns, var_forecasts)?;
    if returns.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(ViolationSeries {
        dates: returns.iter().map(|(d, _)| *d).collect(),
        hits: returns
            .iter()
            .zip(var_forecasts)
            .map(|((_, r), (_, v))| *r < -*v)
            .collect(),
        confidence,
    })
}

/// Likelihood-ratio or asymptotically normal test outcome. `dof` is the
/// chi-square degrees of freedom, or 0 for a two-sided normal statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: u32,
}

impl TestResult {
    fn chi_square(statistic: f64, dof: u32) -> Self {
        let statistic = statistic.max(0.0);
        let p_value = if statistic.is_infinite() {
            0.0
        } else {
            ChiSquared::new(dof as f64)
                .expect("positive degrees of freedom")
                .sf(statistic)
                .clamp(0.0, 1.0)
        };
        Self {
            statistic,
            p_value,
            dof,
        }
    }

    fn normal(statistic: f64) -> Self {
        let p_value = if statistic.is_nan() {
            f64::NAN
        } else {
            erfc(statistic.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
        };
        Self {
            statistic,
            p_value,
            dof: 0,
        }
    }
}

/// `x ln y` with `0 ln y = 0` for any `y`.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn bernoulli_loglik(zeros: f64, ones: f64, prob: f64) -> f64 {
    xlny(zeros, 1.0 - prob) + xlny(ones, prob)
}

/// Kupiec unconditional coverage against violation probability `p`.
pub fn kupiec_uc(v: &ViolationSeries, p: f64) -> Result<TestResult> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("violation probability must be in (0, 1), got {p}")));
    }
    if v.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = v.len() as f64;
    let x = v.count() as f64;
    let stat = -2.0 * (bernoulli_loglik(n - x, x, p) - bernoulli_loglik(n - x, x, x / n));
    Ok(TestResult::chi_square(stat, 1))
}

/// First-order transition counts `[[n00, n01], [n10, n11]]`.
pub fn transition_counts(v: &ViolationSeries) -> [[usize; 2]; 2] {
    let mut counts = [[0; 2]; 2];
    for w in v.hits.windows(2) {
        counts[w[0] as usize][w[1] as usize] += 1;
    }
    counts
}

/// Christoffersen independence test against a first-order Markov
/// alternative. Transition cells with no observations contribute nothing.
pub fn christoffersen_ind(v: &ViolationSeries) -> Result<TestResult> {
    if v.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: v.len(),
        });
    }
    let [[n00, n01], [n10, n11]] = transition_counts(v).map(|r| r.map(|c| c as f64));
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let pi01 = n01 / (n00 + n01);
    let pi11 = n11 / (n10 + n11);
    let restricted = bernoulli_loglik(n00 + n10, n01 + n11, pi);
    let markov = bernoulli_loglik(n00, n01, pi01) + bernoulli_loglik(n10, n11, pi11);
    Ok(TestResult::chi_square(-2.0 * (restricted - markov), 1))
}

/// Unconditional coverage plus independence, on two degrees of freedom.
pub fn conditional_coverage(v: &ViolationSeries, p: f64) -> Result<TestResult> {
    let uc = kupiec_uc(v, p)?;
    let ind = christoffersen_ind(v)?;
    Ok(TestResult::chi_square(uc.statistic + ind.statistic, 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub confidence: f64,
    pub n: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub uc: TestResult,
    pub ind: TestResult,
    pub cc: TestResult,
}

/// All three coverage tests at the series' own confidence level.
pub fn coverage_summary(v: &ViolationSeries) -> Result<CoverageSummary> {
    let p = 1.0 - v.confidence;
    Ok(CoverageSummary {
        confidence: v.confidence,
        n: v.len(),
        violations: v.count(),
        violation_rate: v.rate(),
        uc: kupiec_uc(v, p)?,
        ind: christoffersen_ind(v)?,
        cc: conditional_coverage(v, p)?,
    })
}

/// Diebold-Mariano test on squared errors: `d_t = e_a^2 - e_b^2`. A negative
/// statistic favors `a`.
pub fn dm_test(errors_a: &[f64], errors_b: &[f64]) -> Result<TestResult> {
    let sq = |e: &[f64]| e.iter().map(|x| x * x).collect::<Vec<_>>();
    dm_test_losses(&sq(errors_a), &sq(errors_b))
}

/// Diebold-Mariano test on per-period losses: `d_t = L_a - L_b`,
/// `DM = mean(d) / sqrt(s^2 / n)` with the `n - 1` sample variance.
pub fn dm_test_losses(loss_a: &[f64], loss_b: &[f64]) -> Result<TestResult> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::Misaligned(format!(
            "{} against {} losses",
            loss_a.len(),
            loss_b.len()
        )));
    }
    let n = loss_a.len();
    if n < 2 {
        return Err(Error::InsufficientHistory { needed: 2, available: n });
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    let statistic = if var == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        }
    } else {
        mean / (var / nf).sqrt()
    };
    Ok(TestResult::normal(statistic))
}

/// How a VaR forecast is turned into a per-day loss for the DM test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DmLoss {
    /// Squared gap between return and `-VaR` on violation days, zero
    /// otherwise.
    #[default]
    Exceedance,
    /// Squared gap between return and `-VaR` on every day.
    AllDays,
    /// Quantile (pinball) loss of `-VaR` at level `1 - confidence`.
    Pinball,
}

impl DmLoss {
    /// Per-day loss for one return and one VaR forecast.
    pub fn loss(self, ret: f64, var: f64, confidence: f64) -> f64 {
        let q = -var;
        let gap = ret - q;
        match self {
            DmLoss::Exceedance => {
                if ret < q {
                    gap * gap
                } else {
                    0.0
                }
            }
            DmLoss::AllDays => gap * gap,
            DmLoss::Pinball => {
                let level = 1.0 - confidence;
                let indicator = if ret < q { 1.0 } else { 0.0 };
                (level - indicator) * gap
            }
        }
    }
}

/// DM test between two VaR forecast series against the same returns.
pub fn dm_test_var(
    returns: &[(NaiveDate, f64)],
    var_a: &[(NaiveDate, f64)],
    var_b: &[(NaiveDate, f64)],
    confidence: f64,
    loss: DmLoss,
) -> Result<TestResult> {
    check_aligned(returns, var_a)?;
    check_aligned(returns, var_b)?;
    let losses = |var: &[(NaiveDate, f64)]| -> Vec<f64> {
        returns
            .iter()
            .zip(var)
            .map(|((_, r), (_, v))| loss.loss(*r, *v, confidence))
            .collect()
    };
    dm_test_losses(&losses(var_a), &losses(var_b))
}

/// One method's daily VaR forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodForecasts {
    pub name: String,
    pub var: Vec<(NaiveDate, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub method: String,
    pub penalty: f64,
    pub percentage: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub rows: Vec<RankRow>,
}

impl RankTable {
    pub fn get(&self, method: &str) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Daily penalty: on a violation day the shortfall `|r + VaR|`, otherwise
/// `kappa` times the unused cushion `VaR + r`.
pub fn daily_penalty(ret: f64, var: f64, kappa: f64) -> f64 {
    if ret < -var {
        (ret + var).abs()
    } else {
        kappa * (var + ret).max(0.0)
    }
}

/// Cumulative penalties, their shares of the total in percent and
/// ascending-penalty ranks. Tied methods share the lower rank.
pub fn ranking_model(methods: &[MethodForecasts], returns: &[(NaiveDate, f64)], kappa: f64) -> Result<RankTable> {
    if methods.is_empty() {
        return Err(Error::validation("ranking needs at least one method"));
    }
    if !(kappa >= 0.0) {
        return Err(Error::Domain(format!("kappa must be >= 0, got {kappa}")));
    }
    let penalties = methods
        .iter()
        .map(|m| {
            check_aligned(returns, &m.var)?;
            Ok(returns
                .iter()
                .zip(&m.var)
                .map(|((_, r), (_, v))| daily_penalty(*r, *v, kappa))
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = penalties.iter().sum();
    let k = methods.len() as f64;
    let rows = methods
        .iter()
        .zip(&penalties)
        .map(|(m, &p)| RankRow {
            method: m.name.clone(),
            penalty: p,
            percentage: if total > 0.0 { 100.0 * p / total } else { 100.0 / k },
            rank: 1 + penalties.iter().filter(|&&q| q < p).count(),
        })
        .collect();
    Ok(RankTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn series(hits: &[u8]) -> ViolationSeries {
        ViolationSeries::from_hits(hits.iter().map(|h| *h == 1).collect(), 0.95).unwrap()
    }

    fn with_hits_at(n: usize, at: &[usize]) -> ViolationSeries {
        let mut h = vec![0u8; n];
        for &i in at {
            h[i] = 1;
        }
        series(&h)
    }

    fn dated(values: &[f64]) -> Vec<(NaiveDate, f64)> {
        let start = NaiveDate::from_ymd_opt(2013, 1, 3).unwrap();
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (start + chrono::Days::new(i as u64), *v))
            .collect()
    }

    #[test]
    fn violation_examples() {
        let v = violations(&dated(&[-5.0, 1.0, -2.0]), &dated(&[4.0; 3]), 0.9).unwrap();
        assert_eq!(v.hits, vec![true, false, false]);
        assert_abs_diff_eq!(v.rate(), 1.0 / 3.0);
        let boundary = violations(&dated(&[-4.0]), &dated(&[4.0]), 0.9).unwrap();
        assert_eq!(boundary.hits, vec![false]);
        let v13 = with_hits_at(122, &(0..13).map(|i| i * 9).collect::<Vec<_>>());
        assert_abs_diff_eq!(v13.rate(), 0.1066, epsilon = 1e-4);
    }

    #[test]
    fn misaligned_dates_rejected() {
        let mut var = dated(&[4.0; 3]);
        var[1].0 = var[1].0 + chrono::Days::new(10);
        assert!(matches!(
            violations(&dated(&[-5.0, 1.0, -2.0]), &var, 0.9),
            Err(Error::Misaligned(_))
        ));
        assert!(violations(&dated(&[-5.0, 1.0]), &dated(&[4.0; 3]), 0.9).is_err());
    }

    #[test]
    fn kupiec_fixtures() {
        let one = kupiec_uc(&with_hits_at(122, &[60]), 0.05).unwrap();
        assert!((6.6..=7.0).contains(&one.statistic), "{}", one.statistic);
        assert!(one.p_value > 0.005 && one.p_value < 0.015);
        let thirteen = kupiec_uc(&with_hits_at(122, &(0..13).map(|i| i * 9).collect::<Vec<_>>()), 0.10).unwrap();
        assert!((0.03..=0.12).contains(&thirteen.statistic), "{}", thirteen.statistic);
        let exact = kupiec_uc(&with_hits_at(100, &(0..5).collect::<Vec<_>>()), 0.05).unwrap();
        assert_abs_diff_eq!(exact.statistic, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(exact.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kupiec_extremes_are_finite() {
        let none = kupiec_uc(&with_hits_at(50, &[]), 0.05).unwrap();
        assert_abs_diff_eq!(none.statistic, -2.0 * 50.0 * 0.95f64.ln(), epsilon = 1e-12);
        let all = kupiec_uc(&series(&[1; 10]), 0.05).unwrap();
        assert_abs_diff_eq!(all.statistic, -2.0 * 10.0 * 0.05f64.ln(), epsilon = 1e-12);
    }

    /// Log-likelihood of a hit sequence under a first-order Markov chain,
    /// accumulated transition by transition.
    fn markov_loglik(hits: &[bool], p01: f64, p11: f64) -> f64 {
        hits.windows(2)
            .map(|w| {
                let p1 = if w[0] { p11 } else { p01 };
                if w[1] {
                    p1.ln()
                } else {
                    (1.0 - p1).ln()
                }
            })
            .sum()
    }

    fn brute_force_ind(hits: &[bool]) -> f64 {
        let pairs: Vec<_> = hits.windows(2).map(|w| (w[0], w[1])).collect();
        let from = |a: bool| pairs.iter().filter(|(x, _)| *x == a).count() as f64;
        let both = |a: bool| pairs.iter().filter(|(x, y)| *x == a && *y).count() as f64;
        let pi = pairs.iter().filter(|(_, y)| *y).count() as f64 / pairs.len() as f64;
        let p01 = if from(false) > 0.0 { both(false) / from(false) } else { 0.5 };
        let p11 = if from(true) > 0.0 { both(true) / from(true) } else { 0.5 };
        -2.0 * (markov_loglik(hits, pi, pi) - markov_loglik(hits, p01, p11))
    }

    #[test]
    fn independence_matches_direct_likelihood() {
        let clustered = series(&[1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        let ind = christoffersen_ind(&clustered).unwrap();
        assert_abs_diff_eq!(ind.statistic, brute_force_ind(&clustered.hits), epsilon = 1e-12);
        let spread = with_hits_at(20, &[3, 12]);
        assert!(ind.statistic > christoffersen_ind(&spread).unwrap().statistic);
    }

    #[test]
    fn independence_zero_when_transitions_match() {
        let v = series(&[0, 0, 1, 1, 0, 0, 1, 1, 0]);
        assert_abs_diff_eq!(christoffersen_ind(&v).unwrap().statistic, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_hit_independence_is_small() {
        let ind = christoffersen_ind(&with_hits_at(122, &[60])).unwrap();
        assert!(ind.statistic > 0.0 && ind.statistic < 0.05, "{}", ind.statistic);
        assert!(ind.p_value > 0.8);
    }

    #[test]
    fn conditional_coverage_is_the_sum() {
        let v = with_hits_at(122, &[60]);
        let uc = kupiec_uc(&v, 0.05).unwrap();
        let ind = christoffersen_ind(&v).unwrap();
        let cc = conditional_coverage(&v, 0.05).unwrap();
        assert_eq!(cc.dof, 2);
        assert_eq!(cc.statistic, uc.statistic + ind.statistic);
        assert!((6.6..=7.1).contains(&cc.statistic));
        assert!(cc.p_value > 0.02 && cc.p_value < 0.05);

        let zero = conditional_coverage(&series(&[0, 0, 1, 1, 0, 0, 1, 1, 0]), 4.0 / 9.0).unwrap();
        assert_abs_diff_eq!(zero.statistic, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(zero.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dm_examples() {
        let same = dm_test(&[0.1, -0.3, 2.0], &[0.1, -0.3, 2.0]).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);

        let r = dm_test(&[1.0, 2.0, 3.0, 4.0], &[2.0, 2.0, 2.0, 2.0]).unwrap();
        // d = {-3, 0, 5, 12}: mean 3.5, sample variance 43.
        let expected = 3.5 / (43.0f64 / 4.0).sqrt();
        assert_abs_diff_eq!(r.statistic, expected, epsilon = 1e-12);
        let swapped = dm_test(&[2.0, 2.0, 2.0, 2.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(swapped.statistic, -r.statistic);
        assert_eq!(swapped.p_value, r.p_value);

        let inf = dm_test(&[2.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(inf.statistic, f64::INFINITY);
        assert_eq!(inf.p_value, 0.0);
        assert!(dm_test(&[1.0], &[1.0]).is_err());
        assert!(dm_test(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn dm_loss_variants() {
        assert_eq!(DmLoss::Exceedance.loss(-6.0, 5.0, 0.95), 1.0);
        assert_eq!(DmLoss::Exceedance.loss(-4.0, 5.0, 0.95), 0.0);
        assert_eq!(DmLoss::AllDays.loss(-4.0, 5.0, 0.95), 1.0);
        assert_abs_diff_eq!(DmLoss::Pinball.loss(-6.0, 5.0, 0.95), 0.95, epsilon = 1e-12);
        assert_abs_diff_eq!(DmLoss::Pinball.loss(-4.0, 5.0, 0.95), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn ranking_examples() {
        let returns = dated(&[-6.0]);
        let methods = vec![
            MethodForecasts { name: "a".into(), var: dated(&[5.0]) },
            MethodForecasts { name: "b".into(), var: dated(&[8.0]) },
        ];
        let t = ranking_model(&methods, &returns, 1.0).unwrap();
        assert_eq!(t.get("a").unwrap().penalty, 1.0);
        assert_eq!(t.get("b").unwrap().penalty, 2.0);
        assert_eq!(t.get("a").unwrap().rank, 1);
        assert_eq!(t.get("b").unwrap().rank, 2);
        let pct: f64 = t.rows.iter().map(|r| r.percentage).sum();
        assert_abs_diff_eq!(pct, 100.0, epsilon = 1e-9);

        let twins = vec![
            MethodForecasts { name: "x".into(), var: dated(&[3.0, 1.0]) },
            MethodForecasts { name: "y".into(), var: dated(&[3.0, 1.0]) },
            MethodForecasts { name: "z".into(), var: dated(&[9.0, 9.0]) },
        ];
        let t = ranking_model(&twins, &dated(&[-2.0, 0.5]), 1.0).unwrap();
        assert_eq!(t.get("x").unwrap().rank, 1);
        assert_eq!(t.get("y").unwrap().rank, 1);
        assert_eq!(t.get("z").unwrap().rank, 3);
    }

    #[test]
    fn ranking_zero_penalty_splits_evenly() {
        let methods = vec![
            MethodForecasts { name: "a".into(), var: dated(&[2.0]) },
            MethodForecasts { name: "b".into(), var: dated(&[2.0]) },
        ];
        let t = ranking_model(&methods, &dated(&[-2.0]), 1.0).unwrap();
        assert!(t.rows.iter().all(|r| r.percentage == 50.0 && r.rank == 1));
    }

    proptest! {
        #[test]
        fn kupiec_nonnegative(hits in prop::collection::vec(any::<bool>(), 1..300), p in 0.01..0.5f64) {
            let v = ViolationSeries::from_hits(hits, 0.95).unwrap();
            prop_assert!(kupiec_uc(&v, p).unwrap().statistic >= 0.0);
        }

        #[test]
        fn independence_matches_brute_force(hits in prop::collection::vec(any::<bool>(), 2..200)) {
            let v = ViolationSeries::from_hits(hits.clone(), 0.95).unwrap();
            let got = christoffersen_ind(&v).unwrap().statistic;
            let want = brute_force_ind(&hits).max(0.0);
            prop_assert!((got - want).abs() < 1e-9 * (1.0 + want), "{} vs {}", got, want);
        }

        #[test]
        fn dm_antisymmetric(a in prop::collection::vec(-5.0..5.0f64, 2..60), seed in any::<u64>()) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * 0.5 + ((seed >> (i % 60)) & 7) as f64 * 0.1).collect();
            let ab = dm_test(&a, &b).unwrap();
            let ba = dm_test(&b, &a).unwrap();
            prop_assert_eq!(ab.statistic, -ba.statistic);
            prop_assert_eq!(ab.p_value, ba.p_value);
        }

        #[test]
        fn violations_translation_invariant(rs in prop::collection::vec(-5.0..5.0f64, 1..50), c in -3.0..3.0f64) {
            let vars: Vec<f64> = rs.iter().map(|r| r.abs() * 0.7 + 0.1).collect();
            let base = violations(&dated(&rs), &dated(&vars), 0.9).unwrap();
            let shifted_r: Vec<f64> = rs.iter().map(|r| r + c).collect();
            let shifted_v: Vec<f64> = vars.iter().map(|v| v - c).collect();
            let moved = violations(&dated(&shifted_r), &dated(&shifted_v), 0.9).unwrap();
            let rate = moved.rate();
            prop_assert!((0.0..=1.0).contains(&rate));
            // Float rounding can only flip exact ties.
            let flips = base.hits.iter().zip(&moved.hits).filter(|(a, b)| a != b).count();
            let ties = rs.iter().zip(&vars).filter(|(r, v)| (**r + **v).abs() < 1e-9).count();
            prop_assert!(flips <= ties);
        }
    }
}
