//! The three confirmation tests run alongside Mann-Kendall: Cox-Stuart,
//! regression t-test, and Spearman's rho.

use crate::model::MetricSeries;
use crate::stats::{mean, mid_ranks, ols_line, t_two_sided_p};
use crate::trend::{Alpha, TestName, TestResult, TrendError};

/// (P(X <= k), P(X >= k)) for X ~ Binomial(m, 1/2), by direct summation of
/// the point masses. All quantities are dyadic rationals, so the result is
/// exact in floating point for small m. Beyond m = 1000 the leading mass
/// underflows, so the continuity-corrected normal approximation takes over.
fn binomial_half_tails(m: u64, k: u64) -> (f64, f64) {
    if m > 1000 {
        let mean = m as f64 / 2.0;
        let sd = (m as f64).sqrt() / 2.0;
        let lower = crate::stats::normal_cdf((k as f64 + 0.5 - mean) / sd);
        let upper = 1.0 - crate::stats::normal_cdf((k as f64 - 0.5 - mean) / sd);
        return (lower, upper);
    }
    let mut masses = Vec::with_capacity(m as usize + 1);
    let mut p = 0.5f64.powi(m as i32);
    for i in 0..=m {
        masses.push(p);
        if i < m {
            p = p * (m - i) as f64 / (i + 1) as f64;
        }
    }
    let lower: f64 = masses[..=k as usize].iter().sum();
    let upper: f64 = masses[k as usize..].iter().sum();
    (lower, upper)
}

/// Cox-Stuart sign test: pair the first half with the second half (middle
/// element dropped for odd n), discard ties, exact two-sided binomial on the
/// count of positive differences.
pub fn cox_stuart(series: &MetricSeries, alpha: Alpha) -> Result<TestResult, TrendError> {
    let values = series.values();
    let n = values.len();
    if n < 6 {
        return Err(TrendError::TooShort { need: 6, got: n });
    }
    let half = n / 2;
    let (first, second) = if n.is_multiple_of(2) {
        (&values[..half], &values[half..])
    } else {
        (&values[..half], &values[half + 1..])
    };
    let mut positives = 0u64;
    let mut untied = 0u64;
    for (a, b) in first.iter().zip(second) {
        if b > a {
            positives += 1;
            untied += 1;
        } else if b < a {
            untied += 1;
        }
    }
    if untied == 0 {
        return Err(TrendError::AllTied);
    }
    let (lower, upper) = binomial_half_tails(untied, positives);
    let p = (2.0 * lower.min(upper)).min(1.0);
    Ok(TestResult::with_p(
        TestName::CoxStuart,
        positives as f64,
        p,
        alpha,
    ))
}

/// Significance of the least-squares slope of value on time.
///
/// A perfect fit has zero residual variance: by convention a nonzero slope
/// rejects with p = 0 and a zero slope fails to reject with p = 1.
pub fn t_test_trend(series: &MetricSeries, alpha: Alpha) -> Result<TestResult, TrendError> {
    let n = series.len();
    if n < 4 {
        return Err(TrendError::TooShort { need: 4, got: n });
    }
    let times = series.times();
    let values = series.values();
    let mt = mean(&times);
    let sxx: f64 = times.iter().map(|t| (t - mt) * (t - mt)).sum();
    if sxx == 0.0 {
        return Err(TrendError::ZeroVariance);
    }
    let (b0, b1) = ols_line(&times, &values);
    let ss: f64 = series
        .samples
        .iter()
        .map(|s| (s.value - (b0 + b1 * s.t)).powi(2))
        .sum();
    let my = mean(&values);
    let syy: f64 = values.iter().map(|v| (v - my) * (v - my)).sum();

    if ss <= syy * 1e-18 {
        return Ok(if b1 == 0.0 {
            TestResult::with_p(TestName::TTest, 0.0, 1.0, alpha)
        } else {
            TestResult::with_p(TestName::TTest, f64::INFINITY.copysign(b1), 0.0, alpha)
        });
    }

    let se = (ss / (n as f64 - 2.0) / sxx).sqrt();
    let t = b1 / se;
    let p = t_two_sided_p(t, n as f64 - 2.0);
    Ok(TestResult::with_p(TestName::TTest, t, p, alpha))
}

/// Spearman's rho between value ranks and time ranks, mid-ranks for ties;
/// significance via the t approximation with n-2 degrees of freedom.
pub fn spearman_rho_trend(series: &MetricSeries, alpha: Alpha) -> Result<TestResult, TrendError> {
    let n = series.len();
    if n < 4 {
        return Err(TrendError::TooShort { need: 4, got: n });
    }
    let rho = rank_correlation(&series.times(), &series.values())?;
    let p = spearman_p(rho, n);
    Ok(TestResult::with_p(TestName::SpearmanRho, rho, p, alpha))
}

pub(crate) fn spearman_p(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = n as f64 - 2.0;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    t_two_sided_p(t, df)
}

/// Pearson correlation of the mid-ranks of two paired samples.
pub(crate) fn rank_correlation(x: &[f64], y: &[f64]) -> Result<f64, TrendError> {
    let rx = mid_ranks(x);
    let ry = mid_ranks(y);
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(TrendError::AllTied);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Sample, SeriesKind};
    use crate::trend::Decision;

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
                    t: i as f64,
                    value: v,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn cox_stuart_strictly_increasing_n20() {
        let values: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let r = cox_stuart(&series(&values), Alpha::default()).unwrap();
        assert_eq!(r.statistic, 10.0);
        let expected = 2.0 * 0.5f64.powi(10);
        assert!((r.p_value.unwrap() - expected).abs() < 1e-12);
        assert_eq!(r.decision, Decision::Reject);
    }

    #[test]
    fn cox_stuart_constant_is_all_tied() {
        assert!(matches!(
            cox_stuart(&series(&[5.0; 10]), Alpha::default()),
            Err(TrendError::AllTied)
        ));
    }

    #[test]
    fn cox_stuart_odd_n_drops_middle() {
        // n = 7 -> 3 pairs; make the middle element an outlier that must be
        // ignored by the pairing.
        let values = [1.0, 2.0, 3.0, 100.0, 4.0, 5.0, 6.0];
        let r = cox_stuart(&series(&values), Alpha::default()).unwrap();
        assert_eq!(r.statistic, 3.0);
        assert!((r.p_value.unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cox_stuart_survives_very_long_series() {
        // m > 1000 pairs: the exact masses would underflow; the normal
        // approximation must keep balanced series far from rejection.
        // Second half = first half + alternating +-1: exactly 600 positive
        // and 600 negative pair differences.
        let mut values: Vec<f64> = (0..1200).map(|i| i as f64).collect();
        values.extend((0..1200).map(|i| i as f64 + if i % 2 == 0 { 1.0 } else { -1.0 }));
        let r = cox_stuart(&series(&values), Alpha::default()).unwrap();
        let p = r.p_value.unwrap();
        assert!(p > 0.05, "balanced long series should not reject, p = {p}");

        let increasing: Vec<f64> = (0..2400).map(|i| i as f64).collect();
        let r = cox_stuart(&series(&increasing), Alpha::default()).unwrap();
        assert!(r.p_value.unwrap() < 1e-6);
    }

    #[test]
    fn duration_parsing_rejects_overflowing_tokens() {
        use crate::ingest::parse_duration_ms;
        assert_eq!(parse_duration_ms("99999999999999999999h"), None);
        assert_eq!(parse_duration_ms("18446744073709551615s"), None);
    }

    #[test]
    fn t_test_exact_line_rejects_with_p0() {
        let values: Vec<f64> = (0..6).map(|i| 1.0 + 2.0 * i as f64).collect();
        let r = t_test_trend(&series(&values), Alpha::default()).unwrap();
        assert_eq!(r.p_value, Some(0.0));
        assert_eq!(r.decision, Decision::Reject);
    }

    #[test]
    fn t_test_constant_fails_to_reject() {
        let r = t_test_trend(&series(&[3.0; 6]), Alpha::default()).unwrap();
        assert_eq!(r.p_value, Some(1.0));
        assert_eq!(r.decision, Decision::FailToReject);
    }

    #[test]
    fn t_test_slope_matches_normal_equations() {
        // Points (0,1),(1,2),(2,2),(3,3): closed form gives b = 0.6.
        let s = series(&[1.0, 2.0, 2.0, 3.0]);
        let (_, b1) = ols_line(&s.times(), &s.values());
        assert!((b1 - 0.6).abs() < 1e-12);
        let r = t_test_trend(&s, Alpha::default()).unwrap();
        assert!(r.p_value.unwrap() > 0.0 && r.p_value.unwrap() < 1.0);
    }

    #[test]
    fn spearman_monotone_is_plus_minus_one() {
        let inc: Vec<f64> = (0..5).map(|i| (i * i) as f64).collect();
        let r = spearman_rho_trend(&series(&inc), Alpha::default()).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.p_value, Some(0.0));

        let dec: Vec<f64> = (0..5).map(|i| -(i as f64)).collect();
        let r = spearman_rho_trend(&series(&dec), Alpha::default()).unwrap();
        assert_eq!(r.statistic, -1.0);
    }

    #[test]
    fn spearman_rank_difference_example() {
        let r = spearman_rho_trend(&series(&[1.0, 3.0, 2.0, 5.0, 4.0]), Alpha::default()).unwrap();
        assert!((r.statistic - 0.8).abs() < 1e-12);
    }

    #[test]
    fn spearman_all_tied() {
        assert!(matches!(
            spearman_rho_trend(&series(&[2.0; 5]), Alpha::default()),
            Err(TrendError::AllTied)
        ));
    }
}
