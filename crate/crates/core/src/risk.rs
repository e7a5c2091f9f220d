//! Value-at-Risk and Expected Shortfall of empirical PnL distributions.
//!
//! Losses are reported as positive numbers. The quantile is the lower
//! empirical quantile: the smallest sample whose empirical CDF reaches
//! `1 - alpha`, without interpolation, so it is always an attained sample.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::psp::PnLDistribution;
use crate::{Error, Result};

/// Slack for comparing accumulated probabilities against `1 - alpha`.
const CDF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarReport {
    pub as_of: NaiveDate,
    pub confidence: f64,
    pub var: f64,
    pub es: f64,
    pub n_samples: usize,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("confidence must be in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Sample indices sorted by value.
fn sorted_order(d: &PnLDistribution) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| d.samples[a].total_cmp(&d.samples[b]));
    idx
}

/// Lower `p`-quantile of the distribution.
pub fn lower_quantile(d: &PnLDistribution, p: f64) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::EmptySamples);
    }
    let order = sorted_order(d);
    let target = p - CDF_EPS;
    match &d.weights {
        None => {
            let n = d.len();
            let k = order
                .iter()
                .enumerate()
                .position(|(rank, _)| (rank + 1) as f64 / n as f64 >= target)
                .unwrap_or(n - 1);
            Ok(d.samples[order[k]])
        }
        Some(w) => {
            let mut acc = 0.0;
            for &i in &order {
                acc += w[i];
                if acc >= target {
                    return Ok(d.samples[i]);
                }
            }
            Ok(d.samples[*order.last().unwrap()])
        }
    }
}

/// `-q_{1-alpha}`; negative when the quantile itself is a gain.
pub fn var(d: &PnLDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-lower_quantile(d, 1.0 - alpha)?)
}

/// Negated (weighted) mean of the samples at or below `q_{1-alpha}`.
pub fn es(d: &PnLDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let q = lower_quantile(d, 1.0 - alpha)?;
    let (mut sum, mut mass) = (0.0, 0.0);
    for (i, &x) in d.samples.iter().enumerate() {
        if x <= q {
            let w = d.weight(i);
            sum += w * x;
            mass += w;
        }
    }
    if !(mass > 0.0) {
        return Err(Error::Undefined("empty loss tail".into()));
    }
    // The tail mean cannot exceed its boundary; guard against rounding.
    Ok(-(sum / mass).min(q))
}

pub fn var_report(d: &PnLDistribution, alpha: f64) -> Result<VarReport> {
    Ok(VarReport {
        as_of: d.as_of,
        confidence: alpha,
        var: var(d, alpha)?,
        es: es(d, alpha)?,
        n_samples: d.len(),
    })
}
