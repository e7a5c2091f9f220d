//! Cubic B-spline bases over a knot vector.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEGREE: usize = 3;
/// Minimum knot count for a cubic spline with a non-empty domain.
pub const MIN_KNOTS: usize = 2 * (DEGREE + 1);

/// Value of the cubic basis function `B_i` at `x` by the Cox-de Boor
/// recursion.
///
/// Degree-zero pieces are half-open `[t_j, t_{j+1})`. When `x` sits on the
/// right end of the spline domain `t_{n-4}` and that end is a repeated knot,
/// the last non-empty interval is closed so the basis still sums to one there.
pub fn bspline_basis(knots: &[f64], i: usize, x: f64) -> Result<f64> {
    let n = knots.len();
    if n < DEGREE + 2 || i + DEGREE + 1 >= n {
        return Err(Error::IndexOutOfRange { index: i, knots: n });
    }
    let closed = closed_right_interval(knots, x);
    let mut values = [0.0; DEGREE + 1];
    for (j, v) in values.iter_mut().enumerate() {
        let k = i + j;
        let inside = knots[k] <= x && x < knots[k + 1];
        *v = if inside || closed == Some(k) { 1.0 } else { 0.0 };
    }
    for p in 1..=DEGREE {
        for j in 0..=DEGREE - p {
            let k = i + j;
            let left = ratio(x - knots[k], knots[k + p] - knots[k]) * values[j];
            let right = ratio(knots[k + p + 1] - x, knots[k + p + 1] - knots[k + 1]) * values[j + 1];
            values[j] = left + right;
        }
    }
    Ok(values[0])
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn closed_right_interval(knots: &[f64], x: f64) -> Option<usize> {
    let n = knots.len();
    if n < MIN_KNOTS {
        return None;
    }
    let end = knots[n - DEGREE - 1];
    if x != end || knots[n - DEGREE] > end {
        return None;
    }
    (DEGREE..n - DEGREE - 1)
        .rev()
        .find(|&k| knots[k] < knots[k + 1] && knots[k + 1] == end)
}

/// Spline domain `[t_3, t_{n-4}]`.
pub fn domain(knots: &[f64]) -> (f64, f64) {
    (knots[DEGREE], knots[knots.len() - DEGREE - 1])
}

/// The four basis functions that can be non-zero at `x`, after clamping `x`
/// into the domain. Returns the index of the first one and their values.
pub(crate) fn nonzero_basis(knots: &[f64], x: f64) -> (usize, [f64; DEGREE + 1]) {
    let n = knots.len();
    let (lo, hi) = domain(knots);
    let x = x.clamp(lo, hi);
    // Span k in [3, n-5] with t_k <= x < t_{k+1}; the right end uses the last span.
    let last = n - DEGREE - 2;
    let mut span = knots[..=last].partition_point(|t| *t <= x) - 1;
    span = span.clamp(DEGREE, last);
    while span > DEGREE && knots[span] == knots[span + 1] {
        span -= 1;
    }

    let mut values = [0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    values[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let den = right[r + 1] + left[j - r];
            let temp = if den == 0.0 { 0.0 } else { values[r] / den };
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    (span - DEGREE, values)
}

/// Uniform knot layout covering `[lo, hi]` with `n_breaks` breakpoints and
/// three extra equally spaced knots beyond each end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotLayout {
    pub lo: f64,
    pub hi: f64,
    pub n_breaks: usize,
}

impl KnotLayout {
    pub fn new(lo: f64, hi: f64, n_breaks: usize) -> Result<Self> {
        let layout = Self { lo, hi, n_breaks };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::validation(format!(
                "knot range [{}, {}] is empty",
                self.lo, self.hi
            )));
        }
        if self.n_breaks < 2 {
            return Err(Error::validation("a knot layout needs at least 2 breakpoints"));
        }
        Ok(())
    }

    pub fn knots(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / (self.n_breaks - 1) as f64;
        let last = self.n_breaks as i64 - 1;
        (-(DEGREE as i64)..=last + DEGREE as i64)
            .map(|j| match j {
                0 => self.lo,
                j if j == last => self.hi,
                j => self.lo + h * j as f64,
            })
            .collect()
    }

    pub fn n_coeffs(&self) -> usize {
        self.n_breaks + DEGREE - 1
    }
}
