//! One-way group comparison tests: Fisher ANOVA, Welch ANOVA, Levene's
//! variance-homogeneity test, and Kruskal-Wallis.

use crate::groupstats::GroupError;
use crate::stats::{chi2_upper_p, f_upper_p, mean, mid_ranks, sample_variance, tie_group_sizes};

fn check_groups(groups: &[Vec<f64>], min_group: usize) -> Result<(), GroupError> {
    if groups.len() < 2 {
        return Err(GroupError::DegenerateGroups(
            "need at least two groups".into(),
        ));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < min_group {
            return Err(GroupError::DegenerateGroups(format!(
                "group {i} has {} values, need at least {min_group}",
                g.len()
            )));
        }
    }
    Ok(())
}

/// One-way F on raw data: F = MS_between / MS_within, p from F(k-1, N-k).
///
/// Degenerate within-variance follows the convention: zero residual variance
/// with differing means rejects with p = 0; identical data gives F = 0, p = 1.
pub fn fisher_anova(groups: &[Vec<f64>]) -> Result<(f64, f64), GroupError> {
    check_groups(groups, 1)?;
    let k = groups.len() as f64;
    let n: usize = groups.iter().map(Vec::len).sum();
    let nf = n as f64;
    if nf <= k {
        return Err(GroupError::DegenerateGroups(
            "need more observations than groups".into(),
        ));
    }
    let grand = groups.iter().flatten().sum::<f64>() / nf;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = mean(g);
        ssb += g.len() as f64 * (m - grand) * (m - grand);
        ssw += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let msb = ssb / (k - 1.0);
    let msw = ssw / (nf - k);
    if msw == 0.0 {
        return Ok(if msb == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        });
    }
    let f = msb / msw;
    Ok((f, f_upper_p(f, k - 1.0, nf - k)))
}

/// Welch's heteroscedastic one-way ANOVA with Welch-Satterthwaite
/// denominator degrees of freedom.
pub fn welch_anova(groups: &[Vec<f64>]) -> Result<(f64, f64), GroupError> {
    check_groups(groups, 2)?;
    let k = groups.len() as f64;
    let mut weights = Vec::with_capacity(groups.len());
    let mut means = Vec::with_capacity(groups.len());
    for g in groups {
        let var = sample_variance(g);
        if var == 0.0 {
            return Err(GroupError::ZeroGroupVariance);
        }
        weights.push(g.len() as f64 / var);
        means.push(mean(g));
    }
    let w_total: f64 = weights.iter().sum();
    let grand: f64 = weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>() / w_total;
    let a: f64 = weights
        .iter()
        .zip(&means)
        .map(|(w, m)| w * (m - grand) * (m - grand))
        .sum::<f64>()
        / (k - 1.0);
    let lambda: f64 = weights
        .iter()
        .zip(groups)
        .map(|(w, g)| {
            let frac = 1.0 - w / w_total;
            frac * frac / (g.len() as f64 - 1.0)
        })
        .sum();
    let b = 1.0 + 2.0 * (k - 2.0) / (k * k - 1.0) * lambda;
    let f = a / b;
    let df2 = (k * k - 1.0) / (3.0 * lambda);
    Ok((f, f_upper_p(f, k - 1.0, df2)))
}

/// Classic mean-centered Levene test: a one-way F on |x_ij - mean_i|.
pub fn levene(groups: &[Vec<f64>]) -> Result<(f64, f64), GroupError> {
    check_groups(groups, 2)?;
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|v| (v - m).abs()).collect()
        })
        .collect();
    fisher_anova(&z)
}

/// Tie-corrected Kruskal-Wallis H with a chi-square(k-1) p-value.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<(f64, f64), GroupError> {
    check_groups(groups, 1)?;
    let n: usize = groups.iter().map(Vec::len).sum();
    if n < 3 {
        return Err(GroupError::DegenerateGroups(
            "need at least three observations".into(),
        ));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let first = pooled[0];
    if pooled.iter().all(|&v| v == first) {
        return Err(GroupError::AllTied);
    }
    let ranks = mid_ranks(&pooled);
    let nf = n as f64;
    let mut h = 0.0;
    let mut offset = 0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        h += r * r / g.len() as f64;
        offset += g.len();
    }
    h = 12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0);
    let tie_term: f64 = tie_group_sizes(&pooled)
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let correction = 1.0 - tie_term / (nf * nf * nf - nf);
    h /= correction;
    let k = groups.len() as f64;
    Ok((h, chi2_upper_p(h, k - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fisher_identical_groups() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let (f, p) = fisher_anova(&g).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn fisher_textbook_sums_of_squares() {
        // {1,2,3} vs {4,5,6}: SSB = 13.5, SSW = 4, F = 13.5/(4/4) = 13.5.
        let g = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let (f, p) = fisher_anova(&g).unwrap();
        assert_relative_eq!(f, 13.5, epsilon = 1e-12);
        assert!(p > 0.0 && p < 0.05);
    }

    #[test]
    fn fisher_zero_within_variance_convention() {
        let g = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let (_, p) = fisher_anova(&g).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn fisher_rejects_empty_group() {
        let g = vec![vec![1.0], vec![], vec![2.0]];
        assert!(matches!(
            fisher_anova(&g),
            Err(GroupError::DegenerateGroups(_))
        ));
    }

    #[test]
    fn welch_equal_groups_f_zero() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let (f, p) = welch_anova(&g).unwrap();
        assert_relative_eq!(f, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn welch_two_groups_is_squared_welch_t() {
        let a = vec![1.0, 2.5, 3.0, 4.5, 6.0];
        let b = vec![2.0, 2.2, 2.4, 2.8];
        let (f, _) = welch_anova(&[a.clone(), b.clone()]).unwrap();
        // Welch two-sample t on the same data.
        let (ma, mb) = (mean(&a), mean(&b));
        let (va, vb) = (sample_variance(&a), sample_variance(&b));
        let t = (ma - mb) / (va / a.len() as f64 + vb / b.len() as f64).sqrt();
        assert_relative_eq!(f, t * t, epsilon = 1e-10);
    }

    #[test]
    fn welch_zero_variance_group() {
        let g = vec![vec![1.0, 1.0], vec![2.0, 3.0]];
        assert!(matches!(
            welch_anova(&g),
            Err(GroupError::ZeroGroupVariance)
        ));
    }

    #[test]
    fn levene_identical_groups() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let (f, p) = levene(&g).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn levene_matches_anova_on_absolute_deviations() {
        // Z groups are {1,0,1} and {3,0,3}.
        let g = vec![vec![1.0, 2.0, 3.0], vec![0.0, 3.0, 6.0]];
        let (f, p) = levene(&g).unwrap();
        let z = vec![vec![1.0, 0.0, 1.0], vec![3.0, 0.0, 3.0]];
        let (f2, p2) = fisher_anova(&z).unwrap();
        assert_relative_eq!(f, f2, epsilon = 1e-12);
        assert_relative_eq!(p, p2, epsilon = 1e-12);
    }

    #[test]
    fn levene_single_group() {
        assert!(matches!(
            levene(&[vec![1.0, 2.0]]),
            Err(GroupError::DegenerateGroups(_))
        ));
    }

    #[test]
    fn kruskal_wallis_identical_groups_h_zero() {
        let g = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let (h, p) = kruskal_wallis(&g).unwrap();
        assert_relative_eq!(h, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kruskal_wallis_rank_sum_example() {
        // {1,2} vs {3,4}: R = (3, 7), H = 12/20 * 29 - 15 = 2.4.
        let g = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let (h, _) = kruskal_wallis(&g).unwrap();
        assert_relative_eq!(h, 2.4, epsilon = 1e-12);
    }

    #[test]
    fn kruskal_wallis_all_tied() {
        let g = vec![vec![5.0, 5.0], vec![5.0, 5.0]];
        assert!(matches!(kruskal_wallis(&g), Err(GroupError::AllTied)));
    }

    #[test]
    fn kruskal_wallis_two_groups_matches_rank_sum_z_squared() {
        // Without ties, H for k=2 equals the squared z of the rank-sum test.
        let a = vec![1.0, 4.0, 2.5, 7.0, 10.0];
        let b = vec![3.0, 5.0, 6.0, 8.0];
        let (h, _) = kruskal_wallis(&[a.clone(), b.clone()]).unwrap();
        let pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
        let ranks = mid_ranks(&pooled);
        let n1 = a.len() as f64;
        let n2 = b.len() as f64;
        let r1: f64 = ranks[..a.len()].iter().sum();
        let expected = n1 * (n1 + n2 + 1.0) / 2.0;
        let var = n1 * n2 * (n1 + n2 + 1.0) / 12.0;
        let z = (r1 - expected) / var.sqrt();
        assert_relative_eq!(h, z * z, epsilon = 1e-10);
    }
}
