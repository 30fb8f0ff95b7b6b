//! Numeric diagnostics: the critical signal level, detection-boundary ratios,
//! the Bernstein tail for sampling without replacement and the union-bound
//! upper bound on the log p-value it implies. Natural logarithms throughout.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::stats::DataMatrix;

fn check_dims(rows: usize, cols: usize, m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 || m > rows || n > cols {
        return Err(Error::Dimension { m, n, rows, cols });
    }
    Ok(())
}

/// `m log(M/m) + n log(N/n)`.
fn entropy_term(rows: usize, cols: usize, m: usize, n: usize) -> f64 {
    let (big_m, big_n, m, n) = (rows as f64, cols as f64, m as f64, n as f64);
    m * (big_m / m).ln() + n * (big_n / n).ln()
}

/// `sqrt(2 (m log(M/m) + n log(N/n)) / (m n))`.
pub fn theta_crit(rows: usize, cols: usize, m: usize, n: usize) -> Result<f64> {
    check_dims(rows, cols, m, n)?;
    if m == rows && n == cols {
        return Err(Error::invalid(
            "theta_crit is zero when the block covers the whole matrix",
        ));
    }
    Ok((2.0 * entropy_term(rows, cols, m, n) / (m as f64 * n as f64)).sqrt())
}

/// Where a signal level sits relative to the scan and sum detection boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub rows: usize,
    pub cols: usize,
    pub m: usize,
    pub n: usize,
    pub theta: f64,
    pub theta_crit: f64,
    /// `theta sqrt(mn) / sqrt(2 (m log(M/m) + n log(N/n)))`; the scan test is
    /// powerful when this stays above 1.
    pub scan_ratio: f64,
    /// `theta mn / sqrt(MN)`; the sum test is powerful when this diverges.
    pub sum_ratio: f64,
}

pub fn detection_ratios(
    theta: f64,
    rows: usize,
    cols: usize,
    m: usize,
    n: usize,
) -> Result<RegimeReport> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::invalid(format!("theta must be finite and >= 0, got {theta}")));
    }
    let crit = theta_crit(rows, cols, m, n)?;
    let mn = m as f64 * n as f64;
    Ok(RegimeReport {
        rows,
        cols,
        m,
        n,
        theta,
        theta_crit: crit,
        scan_ratio: theta / crit,
        sum_ratio: theta * mn / (rows as f64 * cols as f64).sqrt(),
    })
}

/// Log of the Bernstein bound on `P(mean of sample >= population mean + t)`
/// for `sample_count` draws without replacement:
/// `-m t^2 / (2 sigma^2 + (2/3) spread t)`.
pub fn bernstein_log_tail(sample_count: u64, t: f64, variance: f64, spread: f64) -> Result<f64> {
    if sample_count == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    for (name, v) in [("t", t), ("variance", variance), ("spread", spread)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let denom = 2.0 * variance + 2.0 / 3.0 * spread * t;
    if denom <= 0.0 {
        return Err(Error::DegeneratePopulation);
    }
    Ok(-(sample_count as f64) * t * t / denom)
}

/// `log C(n, k)` through log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::invalid(format!("C({n}, {k}) with k > n")));
    }
    if k == 0 || k == n {
        return Ok(0.0);
    }
    let (n, k) = (n as f64, k as f64);
    Ok(ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0))
}

/// Union-bound control of the log Bonferroni p-value:
/// `log(MN) + log C(M,m) + log C(N,n) + bernstein_log_tail(mn, t, sigma^2, spread)`.
///
/// Positive results are vacuous.
pub fn log_pvalue_bound(
    rows: usize,
    cols: usize,
    m: usize,
    n: usize,
    t: f64,
    variance: f64,
    spread: f64,
) -> Result<f64> {
    check_dims(rows, cols, m, n)?;
    let union = (rows as f64 * cols as f64).ln()
        + ln_binomial(rows as u64, m as u64)?
        + ln_binomial(cols as u64, n as u64)?;
    Ok(union + bernstein_log_tail((m * n) as u64, t, variance, spread)?)
}

/// High-probability bound `(3 / c) log(MN)` on `max - mean` for light-tailed
/// noise; `c` must be supplied by the caller.
pub fn spread_bound(rows: usize, cols: usize, c: f64) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::invalid(format!("c must be finite and > 0, got {c}")));
    }
    Ok(3.0 / c * (rows as f64 * cols as f64).ln())
}

/// Mean, population variance and maximum of all entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub mean: f64,
    pub variance: f64,
    pub max: f64,
}

impl PopulationSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty population"));
        }
        let len = values.len() as f64;
        let mean = values.iter().sum::<f64>() / len;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            mean,
            variance,
            max,
        })
    }

    pub fn spread(&self) -> f64 {
        self.max - self.mean
    }
}

/// Data-driven version of [`log_pvalue_bound`] for an observed `(m, n)` scan
/// value on `x`, with `t = scan / mn - mean` (clamped at 0).
pub fn empirical_log_pvalue_bound(x: &DataMatrix, scan_value: f64, m: usize, n: usize) -> Result<f64> {
    let summary = PopulationSummary::of(x.values())?;
    let t = (scan_value / (m * n) as f64 - summary.mean).max(0.0);
    log_pvalue_bound(x.rows(), x.cols(), m, n, t, summary.variance, summary.spread())
}
