//! Durbin-Watson residual autocorrelation check used to route between the
//! plain and the variance-corrected Mann-Kendall test.

use crate::model::MetricSeries;
use crate::stats::ols_line;
use crate::trend::{Decision, TestName, TestResult, TrendError};

/// Savin-White lower/upper critical bounds for one regressor at alpha = 0.05.
/// Rows are (n, dL, dU); intermediate n are linearly interpolated and n
/// beyond the table is clamped to the last row, which biases toward
/// "inconclusive" and thus toward the corrected Mann-Kendall route.
const DW_BOUNDS: &[(usize, f64, f64)] = &[
    (6, 0.610, 1.400),
    (7, 0.700, 1.356),
    (8, 0.763, 1.332),
    (9, 0.824, 1.320),
    (10, 0.879, 1.320),
    (11, 0.927, 1.324),
    (12, 0.971, 1.331),
    (13, 1.010, 1.340),
    (14, 1.045, 1.350),
    (15, 1.077, 1.361),
    (16, 1.106, 1.371),
    (17, 1.133, 1.381),
    (18, 1.158, 1.391),
    (19, 1.180, 1.401),
    (20, 1.201, 1.411),
    (21, 1.221, 1.420),
    (22, 1.239, 1.429),
    (23, 1.257, 1.437),
    (24, 1.273, 1.446),
    (25, 1.288, 1.454),
    (26, 1.302, 1.461),
    (27, 1.316, 1.469),
    (28, 1.328, 1.476),
    (29, 1.341, 1.483),
    (30, 1.352, 1.489),
    (31, 1.363, 1.496),
    (32, 1.373, 1.502),
    (33, 1.383, 1.508),
    (34, 1.393, 1.514),
    (35, 1.402, 1.519),
    (36, 1.411, 1.525),
    (37, 1.419, 1.530),
    (38, 1.427, 1.535),
    (39, 1.435, 1.540),
    (40, 1.442, 1.544),
    (45, 1.475, 1.566),
    (50, 1.503, 1.585),
    (55, 1.528, 1.601),
    (60, 1.549, 1.616),
    (65, 1.567, 1.629),
    (70, 1.583, 1.641),
    (75, 1.598, 1.652),
    (80, 1.611, 1.662),
    (85, 1.624, 1.671),
    (90, 1.635, 1.679),
    (95, 1.645, 1.687),
    (100, 1.654, 1.694),
    (150, 1.720, 1.746),
    (200, 1.758, 1.778),
];

/// (dL, dU) for the given sample size.
pub fn critical_bounds(n: usize) -> (f64, f64) {
    let first = DW_BOUNDS[0];
    let last = DW_BOUNDS[DW_BOUNDS.len() - 1];
    if n <= first.0 {
        return (first.1, first.2);
    }
    if n >= last.0 {
        return (last.1, last.2);
    }
    for w in DW_BOUNDS.windows(2) {
        let (n0, dl0, du0) = w[0];
        let (n1, dl1, du1) = w[1];
        if n0 <= n && n <= n1 {
            if n == n0 {
                return (dl0, du0);
            }
            let f = (n - n0) as f64 / (n1 - n0) as f64;
            return (dl0 + f * (dl1 - dl0), du0 + f * (du1 - du0));
        }
    }
    unreachable!("table covers the range");
}

/// d = sum (e_t - e_{t-1})^2 / sum e_t^2; a zero residual vector (perfect
/// fit) is reported as d = 2, i.e. no autocorrelation evidence.
pub fn dw_statistic(residuals: &[f64]) -> f64 {
    let denom: f64 = residuals.iter().map(|e| e * e).sum();
    if denom == 0.0 {
        return 2.0;
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    num / denom
}

/// Durbin-Watson test on the residuals of the least-squares line over time.
///
/// Decision mapping: `Reject` means autocorrelation evidence (either d or
/// 4-d below dL), `FailToReject` means neither tail shows evidence (both
/// d and 4-d above dU), anything between is `Inconclusive`.
pub fn durbin_watson(series: &MetricSeries) -> Result<TestResult, TrendError> {
    let n = series.len();
    if n < 6 {
        return Err(TrendError::TooShort { need: 6, got: n });
    }
    let times = series.times();
    let values = series.values();
    let (b0, b1) = ols_line(&times, &values);
    let residuals: Vec<f64> = series
        .samples
        .iter()
        .map(|s| s.value - (b0 + b1 * s.t))
        .collect();

    let syy: f64 = {
        let my = values.iter().sum::<f64>() / n as f64;
        values.iter().map(|v| (v - my) * (v - my)).sum()
    };
    let ss: f64 = residuals.iter().map(|e| e * e).sum();
    let d = if ss <= syy * 1e-18 {
        2.0
    } else {
        dw_statistic(&residuals)
    };

    let (dl, du) = critical_bounds(n);
    let decision = if d < dl || (4.0 - d) < dl {
        Decision::Reject
    } else if d > du && (4.0 - d) > du {
        Decision::FailToReject
    } else {
        Decision::Inconclusive
    };

    Ok(TestResult {
        test: TestName::DurbinWatson,
        statistic: d,
        p_value: None,
        decision,
    })
}
