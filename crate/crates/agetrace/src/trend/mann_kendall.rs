//! Mann-Kendall trend test, plain and with the Hamed-Rao variance correction
//! for serially correlated series.

use std::cmp::Ordering;

use crate::model::MetricSeries;
use crate::stats::{mid_ranks, normal_two_sided_p, tie_group_sizes};
use crate::trend::sen::sen_slope;
use crate::trend::{Alpha, TestName, TestResult, TrendError};

/// Largest n for which the exact permutation distribution of S is used.
const EXACT_N_MAX: usize = 10;

/// S = sum over i<j of sgn(x_j - x_i).
pub fn s_statistic(values: &[f64]) -> i64 {
    let mut s = 0i64;
    for j in 1..values.len() {
        for i in 0..j {
            s += match values[j].partial_cmp(&values[i]) {
                Some(Ordering::Greater) => 1,
                Some(Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    s
}

/// S and its tie-corrected variance
/// `[n(n-1)(2n+5) - sum_t t(t-1)(2t+5)] / 18`.
pub fn s_and_var(values: &[f64]) -> (i64, f64) {
    let n = values.len() as f64;
    let mut var = n * (n - 1.0) * (2.0 * n + 5.0);
    for t in tie_group_sizes(values) {
        let t = t as f64;
        var -= t * (t - 1.0) * (2.0 * t + 5.0);
    }
    (s_statistic(values), var / 18.0)
}

/// Continuity-corrected standard score of S.
pub fn z_score(s: i64, var: f64) -> f64 {
    if s == 0 || var <= 0.0 {
        return 0.0;
    }
    let shift = if s > 0 { -1.0 } else { 1.0 };
    (s as f64 + shift) / var.sqrt()
}

fn next_permutation(arr: &mut [f64]) -> bool {
    let n = arr.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && arr[i - 1].total_cmp(&arr[i]) != Ordering::Less {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while arr[j].total_cmp(&arr[i - 1]) != Ordering::Greater {
        j -= 1;
    }
    arr.swap(i - 1, j);
    arr[i..].reverse();
    true
}

/// Exact two-sided p of S under random orderings of the observed values.
///
/// Without ties the Mahonian inversion-count recurrence gives the exact
/// distribution; with ties the distinct arrangements of the multiset are
/// enumerated (they are equiprobable under random ordering).
fn exact_two_sided_p(values: &[f64], s_obs: i64) -> f64 {
    let n = values.len();
    debug_assert!(n <= EXACT_N_MAX);
    if tie_group_sizes(values).is_empty() {
        // T(m, k): permutations of m elements with k inversions.
        let c = n * (n - 1) / 2;
        let mut t = vec![0u64; c + 1];
        t[0] = 1;
        for m in 2..=n {
            let mut next = vec![0u64; c + 1];
            for k in 0..=c {
                let lo = k.saturating_sub(m - 1);
                next[k] = t[lo..=k].iter().sum();
            }
            t = next;
        }
        let total: u64 = t.iter().sum();
        let mut hits = 0u64;
        for (k, &count) in t.iter().enumerate() {
            let s = c as i64 - 2 * k as i64;
            if s.abs() >= s_obs.abs() {
                hits += count;
            }
        }
        hits as f64 / total as f64
    } else {
        let mut arr: Vec<f64> = values.to_vec();
        arr.sort_by(f64::total_cmp);
        let (mut hits, mut total) = (0u64, 0u64);
        loop {
            total += 1;
            if s_statistic(&arr).abs() >= s_obs.abs() {
                hits += 1;
            }
            if !next_permutation(&mut arr) {
                break;
            }
        }
        hits as f64 / total as f64
    }
}

/// Two-sided Mann-Kendall trend test.
///
/// Uses the exact S distribution for n <= 10 and the continuity-corrected
/// normal approximation above that. An all-tied series yields S = 0, p = 1.
pub fn mann_kendall(series: &MetricSeries, alpha: Alpha) -> Result<TestResult, TrendError> {
    let values = series.values();
    let n = values.len();
    if n < 4 {
        return Err(TrendError::TooShort { need: 4, got: n });
    }
    let (s, var) = s_and_var(&values);
    let p = if var <= 0.0 {
        1.0
    } else if n <= EXACT_N_MAX {
        exact_two_sided_p(&values, s)
    } else {
        normal_two_sided_p(z_score(s, var))
    };
    Ok(TestResult::with_p(TestName::MannKendall, s as f64, p, alpha))
}

/// Mann-Kendall with the Hamed-Rao effective-sample-size variance correction.
///
/// The series is detrended by the Sen slope line, rank autocorrelations are
/// computed for lags 1..min(n-3, n/4), and the leading run of lags
/// significant at 95% (|rho_k| > 1.96/sqrt(n)) inflates Var(S) by
/// `1 + 2/[n(n-1)(n-2)] * sum_k (n-k)(n-k-1)(n-k-2) rho_k`. The run stops at
/// the first insignificant lag: sample autocorrelations at moderate lags are
/// biased negative under positive serial correlation, and admitting them
/// individually erodes the correction enough to inflate the false-positive
/// rate well past alpha.
pub fn mann_kendall_hamed_rao(
    series: &MetricSeries,
    alpha: Alpha,
) -> Result<TestResult, TrendError> {
    let values = series.values();
    let n = values.len();
    if n < 10 {
        return Err(TrendError::TooShort { need: 10, got: n });
    }
    let (s, var0) = s_and_var(&values);
    if var0 <= 0.0 {
        return Ok(TestResult::with_p(
            TestName::MannKendallHamedRao,
            s as f64,
            1.0,
            alpha,
        ));
    }

    let sen = sen_slope(series, alpha)?;
    let detrended: Vec<f64> = series
        .samples
        .iter()
        .map(|smp| smp.value - sen.slope * smp.t)
        .collect();
    let ranks = mid_ranks(&detrended);
    let factor = variance_inflation(&ranks);
    let var = var0 * factor;
    let p = normal_two_sided_p(z_score(s, var));
    Ok(TestResult::with_p(
        TestName::MannKendallHamedRao,
        s as f64,
        p,
        alpha,
    ))
}

fn variance_inflation(ranks: &[f64]) -> f64 {
    let n = ranks.len();
    let nf = n as f64;
    let rbar = ranks.iter().sum::<f64>() / nf;
    let denom: f64 = ranks.iter().map(|r| (r - rbar) * (r - rbar)).sum();
    if denom <= 0.0 {
        return 1.0;
    }
    let max_lag = (n - 3).min(n / 4);
    let threshold = 1.96 / nf.sqrt();
    let mut sum = 0.0;
    for k in 1..=max_lag {
        let num: f64 = (0..n - k)
            .map(|i| (ranks[i] - rbar) * (ranks[i + k] - rbar))
            .sum();
        let rho = num / denom;
        if rho.abs() <= threshold {
            break;
        }
        let nk = (n - k) as f64;
        sum += nk * (nk - 1.0) * (nk - 2.0) * rho;
    }
    let factor = 1.0 + 2.0 / (nf * (nf - 1.0) * (nf - 2.0)) * sum;
    // The estimator can degenerate on pathological inputs; fall back to the
    // uncorrected variance rather than produce a non-positive one.
    if factor > 0.0 {
        factor
    } else {
        1.0
    }
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
                    t: 30.0 * (i + 1) as f64,
                    value: v,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn strictly_increasing_n10_has_s_45() {
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(s_statistic(&values), 45);
        let r = mann_kendall(&series(&values), Alpha::default()).unwrap();
        assert_eq!(r.statistic, 45.0);
        assert_eq!(r.decision, Decision::Reject);
    }

    #[test]
    fn constant_series_s0_p1() {
        let r = mann_kendall(&series(&[2.0; 8]), Alpha::default()).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
        assert_eq!(r.decision, Decision::FailToReject);
    }

    #[test]
    fn example_sequence_s4() {
        assert_eq!(s_statistic(&[3.0, 1.0, 2.0, 5.0, 4.0]), 4);
    }

    #[test]
    fn variance_matches_brute_force_with_ties() {
        // Brute force: Var over all orderings is not checked here; just the
        // closed-form tie correction on a known case.
        let values = [1.0, 2.0, 2.0, 3.0];
        let (_, var) = s_and_var(&values);
        // n=4: 4*3*13 = 156; tie group of 2: 2*1*9 = 18; (156-18)/18
        assert!((var - (156.0 - 18.0) / 18.0).abs() < 1e-12);
    }

    #[test]
    fn exact_p_matches_enumeration_without_ties() {
        // n=4, values 1..4 shuffled: S=6 occurs only for the sorted order.
        let p = exact_two_sided_p(&[1.0, 2.0, 3.0, 4.0], 6);
        // |S| = 6 for exactly 2 of 24 permutations (ascending, descending).
        assert!((p - 2.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn exact_p_with_ties_is_permutation_fraction() {
        let values = [1.0, 1.0, 2.0];
        let s = s_statistic(&values);
        let p = exact_two_sided_p(&values, s);
        // Arrangements: (1,1,2) S=2, (1,2,1) S=0, (2,1,1) S=-2 -> |S|>=2 in 2/3.
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hamed_rao_equals_plain_mk_without_significant_autocorrelation() {
        // Alternating saw-tooth around a line: lag correlations are strong
        // negative, so use a fixed irregular pattern with no structure.
        let values: Vec<f64> = (0..30)
            .map(|i| ((i * 7919 % 101) as f64) / 101.0)
            .collect();
        let s = series(&values);
        let plain = mann_kendall(&s, Alpha::default()).unwrap();
        let hr = mann_kendall_hamed_rao(&s, Alpha::default()).unwrap();
        // Whether or not a lag passes the filter, p stays in [0,1]; when no
        // lag is significant the two must agree exactly.
        let ranks = mid_ranks(
            &s.samples
                .iter()
                .map(|smp| {
                    smp.value - sen_slope(&s, Alpha::default()).unwrap().slope * smp.t
                })
                .collect::<Vec<_>>(),
        );
        if (variance_inflation(&ranks) - 1.0).abs() < 1e-12 {
            assert_eq!(plain.p_value, hr.p_value);
        }
    }

    #[test]
    fn noiseless_trend_declared_by_both_variants() {
        let values: Vec<f64> = (0..40).map(|i| 2.0 * i as f64).collect();
        let s = series(&values);
        assert_eq!(
            mann_kendall(&s, Alpha::default()).unwrap().decision,
            Decision::Reject
        );
        assert_eq!(
            mann_kendall_hamed_rao(&s, Alpha::default()).unwrap().decision,
            Decision::Reject
        );
    }
}
