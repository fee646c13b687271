//! Aging quantification and localization: degradation projection,
//! time-to-aging-failure, rejuvenation gains, and trend-occurrence rankings.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled task-group rules seeded with the framework service groups.
pub const TASK_GROUPS_CSV: &str = include_str!("../data/task_groups.csv");

/// GC metrics whose trend occurrences are counted per process.
pub const GC_METRICS: [&str; 4] = [
    "gc_duration_explicit",
    "gc_duration_background",
    "gc_pause_explicit",
    "gc_pause_background",
];

/// Task-level rate metrics whose trend occurrences are counted per group.
pub const TASK_METRICS: [&str; 4] = ["majflt", "minflt", "utime", "stime"];

#[derive(Debug, Error)]
pub enum AgingError {
    #[error("{0} must be > 0")]
    InvalidParameter(&'static str),
    #[error("baseline projection has no degradation to gain against")]
    ZeroBaseline,
    #[error("task group rules: {0}")]
    Rules(String),
}

/// Projection of a launch-time degradation slope onto a horizon and a
/// responsiveness threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationProjection {
    pub slope_ms_per_s: f64,
    pub horizon_s: f64,
    pub threshold_ms: f64,
    /// Projected launch-time increase over the horizon; 0 for non-positive slopes.
    pub lt_increase_ms: f64,
    /// Time until the threshold is exceeded; infinite for non-positive slopes.
    pub ttaf_s: f64,
}

impl DegradationProjection {
    pub fn ttaf_hours(&self) -> f64 {
        self.ttaf_s / 3600.0
    }

    /// Builds a projection from already-known increase and TTAF figures
    /// (e.g. a published report table) instead of deriving them from a slope.
    pub fn from_observed(
        lt_increase_ms: f64,
        ttaf_h: f64,
        horizon_s: f64,
        threshold_ms: f64,
    ) -> Self {
        Self {
            slope_ms_per_s: lt_increase_ms / horizon_s,
            horizon_s,
            threshold_ms,
            lt_increase_ms,
            ttaf_s: ttaf_h * 3600.0,
        }
    }
}

/// Projects a degradation slope: `lt_increase = slope * horizon` and
/// `ttaf = threshold / slope` for positive slopes.
pub fn project_degradation(
    slope_ms_per_s: f64,
    horizon_s: f64,
    threshold_ms: f64,
) -> Result<DegradationProjection, AgingError> {
    if !horizon_s.is_finite() || horizon_s <= 0.0 {
        return Err(AgingError::InvalidParameter("horizon_s"));
    }
    if !threshold_ms.is_finite() || threshold_ms <= 0.0 {
        return Err(AgingError::InvalidParameter("threshold_ms"));
    }
    let (lt_increase_ms, ttaf_s) = if slope_ms_per_s > 0.0 {
        (slope_ms_per_s * horizon_s, threshold_ms / slope_ms_per_s)
    } else {
        (0.0, f64::INFINITY)
    };
    Ok(DegradationProjection {
        slope_ms_per_s,
        horizon_s,
        threshold_ms,
        lt_increase_ms,
        ttaf_s,
    })
}

/// Relative improvement of a rejuvenated projection over a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejuvenationGain {
    /// (LT - LT_rejuvenated) / LT * 100.
    pub gain_lt_pct: f64,
    /// (TTAF_rejuvenated - TTAF) / TTAF * 100.
    pub gain_ttaf_pct: f64,
}

impl RejuvenationGain {
    /// Integer percentages as printed in report tables.
    pub fn rounded(&self) -> (i64, i64) {
        (
            self.gain_lt_pct.round() as i64,
            self.gain_ttaf_pct.round() as i64,
        )
    }
}

pub fn rejuvenation_gain(
    baseline: &DegradationProjection,
    rejuvenated: &DegradationProjection,
) -> Result<RejuvenationGain, AgingError> {
    if !baseline.lt_increase_ms.is_finite()
        || baseline.lt_increase_ms <= 0.0
        || !baseline.ttaf_s.is_finite()
    {
        return Err(AgingError::ZeroBaseline);
    }
    Ok(RejuvenationGain {
        gain_lt_pct: (baseline.lt_increase_ms - rejuvenated.lt_increase_ms)
            / baseline.lt_increase_ms
            * 100.0,
        gain_ttaf_pct: (rejuvenated.ttaf_s - baseline.ttaf_s) / baseline.ttaf_s * 100.0,
    })
}

/// The trend facts ranking needs about one analyzed series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendObservation {
    pub experiment: String,
    /// Process name for GC series, `pid/tid/task_name` for task series.
    pub entity: String,
    pub metric: String,
    pub n: usize,
    pub declared: bool,
    pub slope: f64,
}

impl TrendObservation {
    /// Declared verdict with a positive slope: an "increasing trend" occurrence.
    fn increasing(&self) -> bool {
        self.declared && self.slope > 0.0
    }

    /// Task name component of a `pid/tid/name` entity.
    pub fn task_name(&self) -> &str {
        self.entity.splitn(3, '/').nth(2).unwrap_or(&self.entity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankUnit {
    Process,
    TaskGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedUnit {
    pub name: String,
    pub count: f64,
    pub rank: usize,
}

/// Units ordered by how many experiments showed a declared increasing trend
/// for one metric. Ties break lexicographically. `experiments` lists the
/// experiment ids the counting ran over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCountRanking {
    pub unit: RankUnit,
    pub metric: String,
    pub counts: BTreeMap<String, f64>,
    pub top: Vec<RankedUnit>,
    pub experiments: BTreeSet<String>,
}

fn rank_counts(
    unit: RankUnit,
    metric: &str,
    counts: BTreeMap<String, f64>,
    top_n: usize,
    experiments: BTreeSet<String>,
) -> TrendCountRanking {
    let mut ordered: Vec<(String, f64)> = counts.iter().map(|(k, v)| (k.clone(), *v)).collect();
    ordered.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let top = ordered
        .into_iter()
        .take(top_n)
        .enumerate()
        .map(|(i, (name, count))| RankedUnit {
            name,
            count,
            rank: i + 1,
        })
        .collect();
    TrendCountRanking {
        unit,
        metric: metric.to_string(),
        counts,
        top,
        experiments,
    }
}

/// Counts, per process and GC metric, the experiments with a declared
/// increasing trend; only series with at least `min_samples` samples count.
/// Emits the top five processes per metric.
pub fn count_gc_trends(
    observations: &[TrendObservation],
    min_samples: usize,
) -> Vec<TrendCountRanking> {
    GC_METRICS
        .iter()
        .map(|metric| {
            let mut experiments_hit: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
            let mut analyzed = BTreeSet::new();
            for obs in observations {
                if obs.metric != *metric || obs.n < min_samples {
                    continue;
                }
                analyzed.insert(obs.experiment.clone());
                let entry = experiments_hit.entry(obs.entity.clone()).or_default();
                if obs.increasing() {
                    entry.insert(&obs.experiment);
                }
            }
            let counts = experiments_hit
                .into_iter()
                .map(|(k, v)| (k, v.len() as f64))
                .collect();
            rank_counts(RankUnit::Process, metric, counts, 5, analyzed)
        })
        .collect()
}

/// Maps task names to named groups, exact matches first, then `prefix*`
/// patterns; unmatched tasks fall into OTHER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGroupRules {
    exact: BTreeMap<String, String>,
    prefixes: Vec<(String, String)>,
}

impl TaskGroupRules {
    pub const OTHER: &'static str = "OTHER";

    pub fn bundled() -> Self {
        Self::from_csv(TASK_GROUPS_CSV.as_bytes()).expect("bundled rules are valid")
    }

    /// Reads a rules manifest with header `group,pattern`; a trailing `*`
    /// in the pattern makes it a prefix match.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, AgingError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| AgingError::Rules(e.to_string()))?
            .clone();
        let got: Vec<&str> = headers.iter().collect();
        if got != ["group", "pattern"] {
            return Err(AgingError::Rules(format!(
                "expected header group,pattern, got {}",
                got.join(",")
            )));
        }
        let mut exact = BTreeMap::new();
        let mut prefixes = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| AgingError::Rules(e.to_string()))?;
            let group = record.get(0).unwrap_or("").trim().to_string();
            let pattern = record.get(1).unwrap_or("").trim().to_string();
            if group.is_empty() || pattern.is_empty() {
                return Err(AgingError::Rules("empty group or pattern".into()));
            }
            match pattern.strip_suffix('*') {
                Some(prefix) => prefixes.push((prefix.to_string(), group)),
                None => {
                    if let Some(previous) = exact.insert(pattern.clone(), group.clone()) {
                        if previous != group {
                            return Err(AgingError::Rules(format!(
                                "task {pattern} mapped to both {previous} and {group}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self { exact, prefixes })
    }

    pub fn group_of(&self, task_name: &str) -> &str {
        if let Some(group) = self.exact.get(task_name) {
            return group;
        }
        self.prefixes
            .iter()
            .find(|(prefix, _)| task_name.starts_with(prefix.as_str()))
            .map(|(_, group)| group.as_str())
            .unwrap_or(Self::OTHER)
    }
}

/// Ranks task groups by declared-increasing-trend occurrences: per-task
/// counts of experiments, averaged across the tasks of each group. Emits the
/// top ten groups per metric.
pub fn rank_task_groups(
    observations: &[TrendObservation],
    rules: &TaskGroupRules,
) -> Vec<TrendCountRanking> {
    TASK_METRICS
        .iter()
        .map(|metric| {
            // Experiments with an increasing trend, per task entity.
            let mut per_task: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
            let mut analyzed = BTreeSet::new();
            for obs in observations {
                if obs.metric != *metric {
                    continue;
                }
                analyzed.insert(obs.experiment.clone());
                let entry = per_task.entry(obs.entity.as_str()).or_default();
                if obs.increasing() {
                    entry.insert(&obs.experiment);
                }
            }
            let mut group_counts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for (entity, experiments) in per_task {
                let name = entity.splitn(3, '/').nth(2).unwrap_or(entity);
                group_counts
                    .entry(rules.group_of(name).to_string())
                    .or_default()
                    .push(experiments.len() as f64);
            }
            let counts = group_counts
                .into_iter()
                .map(|(group, task_counts)| {
                    let avg = task_counts.iter().sum::<f64>() / task_counts.len() as f64;
                    (group, avg)
                })
                .collect();
            rank_counts(RankUnit::TaskGroup, metric, counts, 10, analyzed)
        })
        .collect()
}
