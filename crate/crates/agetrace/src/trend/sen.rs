//! Sen's slope estimator: median of all pairwise slopes, with the rank-based
//! confidence interval derived from the Mann-Kendall variance.

use serde::{Deserialize, Serialize};

use crate::model::MetricSeries;
use crate::stats::{kth, median, normal_quantile};
use crate::trend::mann_kendall::s_and_var;
use crate::trend::{Alpha, TrendError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenEstimate {
    /// Median pairwise slope, in value units per second.
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Median of `x_i - slope * t_i`.
    pub intercept: f64,
}

/// Fractional order statistic with linear interpolation, clamped into range.
fn order_stat(slopes: &[f64], q: f64) -> f64 {
    let max = (slopes.len() - 1) as f64;
    let q = q.clamp(0.0, max);
    let lo = q.floor() as usize;
    let hi = q.ceil() as usize;
    if lo == hi {
        return kth(slopes, lo);
    }
    let a = kth(slopes, lo);
    let b = kth(slopes, hi);
    a + (q - lo as f64) * (b - a)
}

/// Sen's procedure on a series.
///
/// The 1-alpha confidence bounds are the pairwise slopes at ranks
/// `(N' -+ z_{alpha/2} sqrt(Var(S))) / 2`, the upper one offset by one rank.
pub fn sen_slope(series: &MetricSeries, alpha: Alpha) -> Result<SenEstimate, TrendError> {
    let n = series.len();
    if n < 2 {
        return Err(TrendError::TooShort { need: 2, got: n });
    }
    let samples = &series.samples;
    let mut slopes = Vec::with_capacity(n * (n - 1) / 2);
    for j in 1..n {
        for i in 0..j {
            slopes.push((samples[j].value - samples[i].value) / (samples[j].t - samples[i].t));
        }
    }
    let slope = median(&slopes);

    let (_, var) = s_and_var(&series.values());
    let c = normal_quantile(1.0 - alpha.value() / 2.0) * var.max(0.0).sqrt();
    let np = slopes.len() as f64;
    let m1 = (np - c) / 2.0;
    let m2 = (np + c) / 2.0;
    let ci_low = order_stat(&slopes, m1 - 1.0);
    let ci_high = order_stat(&slopes, m2);

    let intercept_samples: Vec<f64> = samples.iter().map(|s| s.value - slope * s.t).collect();
    let intercept = median(&intercept_samples);

    Ok(SenEstimate {
        slope,
        ci_low,
        ci_high,
        intercept,
    })
}
