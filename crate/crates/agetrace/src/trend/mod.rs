//! The trend-detection battery applied to a single metric series.
//!
//! A Durbin-Watson check on the residuals of the least-squares line routes
//! the series either to the plain Mann-Kendall test (no autocorrelation
//! evidence) or to the Hamed-Rao variance-corrected variant. A trend is
//! declared only if the routed Mann-Kendall test rejects at the chosen alpha
//! and at least two of the three confirmation tests (Cox-Stuart, regression
//! t-test, Spearman's rho) reject as well. Sen's slope and its confidence
//! interval are always attached, declared or not.

mod confirm;
mod durbin_watson;
mod mann_kendall;
mod sen;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use confirm::{cox_stuart, spearman_rho_trend, t_test_trend};
pub use durbin_watson::{critical_bounds, durbin_watson, dw_statistic};
pub use mann_kendall::{mann_kendall, mann_kendall_hamed_rao, s_and_var, s_statistic};
pub use sen::{sen_slope, SenEstimate};

pub(crate) use confirm::{rank_correlation, spearman_p};

#[derive(Debug, Error)]
pub enum TrendError {
    #[error("series too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("all values tied; test undefined")]
    AllTied,
    #[error("zero variance in the regressor")]
    ZeroVariance,
}

/// Significance level; defaults to 0.05 everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Option<Self> {
        (value > 0.0 && value < 1.0).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Self(0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestName {
    #[serde(rename = "MK")]
    MannKendall,
    #[serde(rename = "MK_HamedRao")]
    MannKendallHamedRao,
    #[serde(rename = "CoxStuart")]
    CoxStuart,
    #[serde(rename = "TTest")]
    TTest,
    #[serde(rename = "SpearmanRho")]
    SpearmanRho,
    #[serde(rename = "DurbinWatson")]
    DurbinWatson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    FailToReject,
    Inconclusive,
}

/// Outcome of one test of the battery. `p_value` is absent exactly for
/// Durbin-Watson, whose decision comes from tabulated bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestName,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub decision: Decision,
}

impl TestResult {
    pub(crate) fn with_p(test: TestName, statistic: f64, p: f64, alpha: Alpha) -> Self {
        Self {
            test,
            statistic,
            p_value: Some(p),
            decision: if p < alpha.value() {
                Decision::Reject
            } else {
                Decision::FailToReject
            },
        }
    }
}

/// Which Mann-Kendall variant the autocorrelation check routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutocorrRoute {
    #[serde(rename = "plain_MK")]
    PlainMk,
    #[serde(rename = "modified_MK")]
    ModifiedMk,
}

/// Full result of the trend battery on one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub series_id: String,
    pub n: usize,
    pub route: AutocorrRoute,
    pub dw_statistic: f64,
    pub tests: Vec<TestResult>,
    pub declared: bool,
    pub sen: SenEstimate,
}

impl TrendVerdict {
    pub fn slope(&self) -> f64 {
        self.sen.slope
    }

    pub fn test(&self, name: TestName) -> Option<&TestResult> {
        self.tests.iter().find(|t| t.test == name)
    }
}

/// Degenerate confirmation outcomes (e.g. all values tied) cannot support a
/// trend claim; they count as fail-to-reject rather than aborting the battery.
fn absorb_degenerate(
    result: Result<TestResult, TrendError>,
    test: TestName,
) -> Result<TestResult, TrendError> {
    match result {
        Ok(r) => Ok(r),
        Err(TrendError::AllTied) | Err(TrendError::ZeroVariance) => Ok(TestResult {
            test,
            statistic: 0.0,
            p_value: Some(1.0),
            decision: Decision::FailToReject,
        }),
        Err(e) => Err(e),
    }
}

/// Runs the full battery on a series.
pub fn detect_trend(series: &MetricSeries, alpha: Alpha) -> Result<TrendVerdict, TrendError> {
    let n = series.len();
    if n < 10 {
        return Err(TrendError::TooShort { need: 10, got: n });
    }

    let dw = durbin_watson(series)?;
    let route = match dw.decision {
        Decision::FailToReject => AutocorrRoute::PlainMk,
        _ => AutocorrRoute::ModifiedMk,
    };
    let mk = match route {
        AutocorrRoute::PlainMk => mann_kendall(series, alpha)?,
        AutocorrRoute::ModifiedMk => mann_kendall_hamed_rao(series, alpha)?,
    };

    let cs = absorb_degenerate(cox_stuart(series, alpha), TestName::CoxStuart)?;
    let tt = absorb_degenerate(t_test_trend(series, alpha), TestName::TTest)?;
    let sr = absorb_degenerate(spearman_rho_trend(series, alpha), TestName::SpearmanRho)?;

    let confirmations = [&cs, &tt, &sr]
        .iter()
        .filter(|t| t.decision == Decision::Reject)
        .count();
    let declared = mk.decision == Decision::Reject && confirmations >= 2;

    let sen = sen_slope(series, alpha)?;

    Ok(TrendVerdict {
        series_id: series.id(),
        n,
        route,
        dw_statistic: dw.statistic,
        tests: vec![dw, mk, cs, tt, sr],
        declared,
        sen,
    })
}

use crate::model::MetricSeries;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Sample, SeriesKind};

    fn series(values: &[f64]) -> MetricSeries {
        MetricSeries::new(
            "e",
            "m",
            "ms",
            SeriesKind::Instantaneous,
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| Sample {
                    t: 30.0 * i as f64,
                    value: v,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_series_not_declared_slope_zero() {
        let v = detect_trend(&series(&[7.0; 20]), Alpha::default()).unwrap();
        assert!(!v.declared);
        assert_eq!(v.sen.slope, 0.0);
    }

    #[test]
    fn noiseless_ramp_is_declared() {
        let values: Vec<f64> = (0..40).map(|i| 10.0 + 0.5 * i as f64).collect();
        let v = detect_trend(&series(&values), Alpha::default()).unwrap();
        assert!(v.declared);
        assert!(v.slope() > 0.0);
        assert!(v.sen.ci_low <= v.slope() && v.slope() <= v.sen.ci_high);
    }

    #[test]
    fn too_short_for_battery() {
        assert!(matches!(
            detect_trend(&series(&[1.0; 9]), Alpha::default()),
            Err(TrendError::TooShort { .. })
        ));
    }

    #[test]
    fn verdict_lists_all_five_tests() {
        let values: Vec<f64> = (0..20).map(|i| (i % 5) as f64).collect();
        let v = detect_trend(&series(&values), Alpha::default()).unwrap();
        assert_eq!(v.tests.len(), 5);
        assert!(v.test(TestName::DurbinWatson).is_some());
        assert!(v.test(TestName::CoxStuart).is_some());
        // p_value present exactly when the test is not Durbin-Watson.
        for t in &v.tests {
            assert_eq!(t.p_value.is_none(), t.test == TestName::DurbinWatson);
        }
    }
}
