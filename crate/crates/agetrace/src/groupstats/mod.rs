//! Cross-experiment factor analysis: normality and homoscedasticity checks,
//! the routed one-way comparison, and Spearman correlation between slope
//! vectors.

mod oneway;
mod shapiro;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Factor;
use crate::stats::mean;
use crate::trend::{rank_correlation, spearman_p, Alpha, TrendError};

pub use oneway::{fisher_anova, kruskal_wallis, levene, welch_anova};
pub use shapiro::shapiro_wilk;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("sample too short: need at least {need} values, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("sample too large: at most {max} values supported, got {got}")]
    TooLarge { max: usize, got: usize },
    #[error("all values equal")]
    ZeroRange,
    #[error("all values tied")]
    AllTied,
    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),
    #[error("a group has zero variance")]
    ZeroGroupVariance,
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Per-level slope samples for one factor: the response vectors compared by
/// the routed one-way analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedSlopes {
    pub factor: Factor,
    pub groups: BTreeMap<String, Vec<f64>>,
}

impl GroupedSlopes {
    pub fn new(factor: Factor, groups: BTreeMap<String, Vec<f64>>) -> Result<Self, GroupError> {
        if groups.len() < 2 {
            return Err(GroupError::DegenerateGroups(
                "need at least two levels".into(),
            ));
        }
        if groups.values().any(|g| g.is_empty()) {
            return Err(GroupError::DegenerateGroups("empty level group".into()));
        }
        Ok(Self { factor, groups })
    }

    fn group_values(&self) -> Vec<Vec<f64>> {
        self.groups.values().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RoutedTest {
    Fisher,
    Welch,
    KruskalWallis,
}

impl RoutedTest {
    pub fn name(self) -> &'static str {
        match self {
            RoutedTest::Fisher => "FISHER",
            RoutedTest::Welch => "WELCH",
            RoutedTest::KruskalWallis => "K-W",
        }
    }
}

/// Assumption checks plus the routed test outcome for one factor/response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub shapiro_p: f64,
    pub normal: bool,
    pub levene_p: f64,
    pub homoscedastic: bool,
    pub routed_test: RoutedTest,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// The assumption-driven decision tree: Fisher when residuals are normal and
/// variances homogeneous, Welch when normal but heteroscedastic,
/// Kruskal-Wallis when normality is rejected.
pub fn route_comparison(shapiro_p: f64, levene_p: f64, alpha: Alpha) -> RoutedTest {
    let normal = shapiro_p >= alpha.value();
    let homoscedastic = levene_p >= alpha.value();
    match (normal, homoscedastic) {
        (true, true) => RoutedTest::Fisher,
        (true, false) => RoutedTest::Welch,
        (false, _) => RoutedTest::KruskalWallis,
    }
}

/// Runs the assumption checks on the grouped slopes and the comparison test
/// they route to.
///
/// Normality is assessed on pooled residuals (values minus their group
/// means); when the residuals are degenerate (all equal) normality cannot be
/// rejected and both checks fall back to their no-evidence outcome.
pub fn compare_groups(
    grouped: &GroupedSlopes,
    alpha: Alpha,
) -> Result<GroupComparison, GroupError> {
    let groups = grouped.group_values();
    let residuals: Vec<f64> = groups
        .iter()
        .flat_map(|g| {
            let m = mean(g);
            g.iter().map(move |v| v - m)
        })
        .collect();

    let shapiro_p = match shapiro_wilk(&residuals) {
        Ok((_, p)) => p,
        Err(GroupError::ZeroRange) => 1.0,
        Err(e) => return Err(e),
    };
    let levene_p = match levene(&groups) {
        Ok((_, p)) => p,
        Err(e) => return Err(e),
    };

    let routed_test = route_comparison(shapiro_p, levene_p, alpha);
    let (statistic, p_value) = match routed_test {
        RoutedTest::Fisher => fisher_anova(&groups)?,
        RoutedTest::Welch => welch_anova(&groups)?,
        RoutedTest::KruskalWallis => match kruskal_wallis(&groups) {
            Ok(r) => r,
            // Identical constant groups carry no evidence either way.
            Err(GroupError::AllTied) => (0.0, 1.0),
            Err(e) => return Err(e),
        },
    };

    Ok(GroupComparison {
        shapiro_p,
        normal: shapiro_p >= alpha.value(),
        levene_p,
        homoscedastic: levene_p >= alpha.value(),
        routed_test,
        statistic,
        p_value,
        significant: p_value < alpha.value(),
    })
}

/// Spearman rank correlation between two paired slope vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn spearman_correlation(x: &[f64], y: &[f64]) -> Result<CorrelationResult, GroupError> {
    if x.len() != y.len() {
        return Err(GroupError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 4 {
        return Err(GroupError::TooShort { need: 4, got: n });
    }
    let rho = match rank_correlation(x, y) {
        Ok(r) => r,
        Err(TrendError::AllTied) => return Err(GroupError::AllTied),
        Err(_) => unreachable!("rank correlation only fails on ties"),
    };
    Ok(CorrelationResult {
        rho,
        p_value: spearman_p(rho, n),
        n,
    })
}
