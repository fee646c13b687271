//! Report assembly: factor-comparison tables, slope correlations, trend
//! rankings, and the degradation/rejuvenation report.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aging::{
    count_gc_trends, rank_task_groups, rejuvenation_gain, AgingError, DegradationProjection,
    TaskGroupRules, TrendCountRanking, TrendObservation,
};
use crate::groupstats::{compare_groups, GroupComparison, GroupError, GroupedSlopes};
use crate::model::{partition_by_factor, ExperimentPlan, Factor, ModelError};
use crate::store::VerdictRecord;
use crate::trend::Alpha;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Aging(#[from] AgingError),
    #[error("report: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn obs_from_verdict(v: &VerdictRecord) -> TrendObservation {
    TrendObservation {
        experiment: v.experiment.clone(),
        entity: v.entity.clone(),
        metric: v.metric.clone(),
        n: v.n,
        declared: v.declared,
        slope: v.slope,
    }
}

/// One row of the factor-comparison (assumption-routed ANOVA) report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// `entity/metric` of the response variable.
    pub response: String,
    pub factor: Factor,
    #[serde(flatten)]
    pub comparison: GroupComparison,
    /// Experiments the row derives from.
    pub experiments: Vec<String>,
}

/// Builds one comparison row per response variable with verdicts for every
/// experiment of the plan; responses with partial coverage are returned in
/// the skipped list.
pub fn build_comparisons(
    verdicts: &[VerdictRecord],
    plan: &ExperimentPlan,
    factor: Factor,
    alpha: Alpha,
) -> Result<(Vec<ComparisonRow>, Vec<String>), ReportError> {
    // The plan must be pairwise-partitionable along the factor.
    partition_by_factor(plan, factor)?;

    let experiment_ids: BTreeSet<&str> =
        plan.experiments().iter().map(|c| c.id.as_str()).collect();
    let mut by_response: BTreeMap<(String, String), BTreeMap<&str, f64>> = BTreeMap::new();
    for v in verdicts {
        if experiment_ids.contains(v.experiment.as_str()) {
            by_response
                .entry((v.entity.clone(), v.metric.clone()))
                .or_default()
                .insert(&v.experiment, v.slope);
        }
    }

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for ((entity, metric), slopes) in by_response {
        let response = format!("{entity}/{metric}");
        if slopes.len() != experiment_ids.len() {
            skipped.push(format!("{response}: incomplete experiment coverage"));
            continue;
        }
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for cfg in plan.experiments() {
            groups
                .entry(cfg.level(factor).to_string())
                .or_default()
                .push(slopes[cfg.id.as_str()]);
        }
        // Degenerate responses (e.g. a level whose slopes are all identical)
        // are skipped with a reason rather than aborting the whole report.
        let comparison = GroupedSlopes::new(factor, groups)
            .and_then(|grouped| compare_groups(&grouped, alpha));
        match comparison {
            Ok(comparison) => rows.push(ComparisonRow {
                response,
                factor,
                comparison,
                experiments: experiment_ids.iter().map(|s| s.to_string()).collect(),
            }),
            Err(e) => skipped.push(format!("{response}: {e}")),
        }
    }
    Ok((rows, skipped))
}

pub fn write_comparisons_csv<W: Write>(
    writer: W,
    rows: &[ComparisonRow],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "response",
        "factor",
        "shapiro_p",
        "normal",
        "levene_p",
        "homoscedastic",
        "routed",
        "p_value",
        "significant",
        "experiments",
    ])?;
    for row in rows {
        let c = &row.comparison;
        w.write_record([
            row.response.clone(),
            row.factor.to_string(),
            c.shapiro_p.to_string(),
            c.normal.to_string(),
            c.levene_p.to_string(),
            c.homoscedastic.to_string(),
            c.routed_test.name().to_string(),
            c.p_value.to_string(),
            c.significant.to_string(),
            row.experiments.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the slope-correlation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub process: String,
    pub rho: f64,
    pub p: f64,
    pub n: usize,
    pub experiments: Vec<String>,
}

/// Correlates, per entity carrying `x_metric`, its slope vector across
/// experiments against the slope vector of (`y_entity`, `y_metric`).
pub fn build_correlations(
    verdicts: &[VerdictRecord],
    x_metric: &str,
    y_entity: &str,
    y_metric: &str,
) -> Result<Vec<CorrelationRow>, ReportError> {
    let mut y_by_exp: BTreeMap<&str, f64> = BTreeMap::new();
    for v in verdicts {
        if v.entity == y_entity && v.metric == y_metric {
            y_by_exp.insert(&v.experiment, v.slope);
        }
    }
    let mut x_by_entity: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for v in verdicts {
        if v.metric == x_metric && !(v.entity == y_entity && v.metric == y_metric) {
            x_by_entity
                .entry(&v.entity)
                .or_default()
                .insert(&v.experiment, v.slope);
        }
    }

    let mut rows = Vec::new();
    for (entity, x_by_exp) in x_by_entity {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut experiments = Vec::new();
        for (exp, x) in &x_by_exp {
            if let Some(y) = y_by_exp.get(exp) {
                xs.push(*x);
                ys.push(*y);
                experiments.push(exp.to_string());
            }
        }
        if xs.len() < 4 {
            continue;
        }
        let result = crate::groupstats::spearman_correlation(&xs, &ys)?;
        rows.push(CorrelationRow {
            process: entity.to_string(),
            rho: result.rho,
            p: result.p_value,
            n: result.n,
            experiments,
        });
    }
    Ok(rows)
}

pub fn write_correlations_csv<W: Write>(
    writer: W,
    rows: &[CorrelationRow],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["process", "rho", "p", "n", "experiments"])?;
    for row in rows {
        w.write_record([
            row.process.clone(),
            row.rho.to_string(),
            row.p.to_string(),
            row.n.to_string(),
            row.experiments.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rankings of processes by GC trend occurrences.
pub fn gc_rankings(verdicts: &[VerdictRecord], min_samples: usize) -> Vec<TrendCountRanking> {
    let observations: Vec<TrendObservation> = verdicts.iter().map(obs_from_verdict).collect();
    count_gc_trends(&observations, min_samples)
}

/// Rankings of task groups by task-metric trend occurrences; `process_pid`
/// narrows the tasks to one process.
pub fn task_rankings(
    verdicts: &[VerdictRecord],
    rules: &TaskGroupRules,
    process_pid: Option<u32>,
) -> Vec<TrendCountRanking> {
    let observations: Vec<TrendObservation> = verdicts
        .iter()
        .filter(|v| match process_pid {
            Some(pid) => v
                .entity
                .split('/')
                .next()
                .and_then(|p| p.parse::<u32>().ok())
                == Some(pid),
            None => true,
        })
        .map(obs_from_verdict)
        .collect();
    rank_task_groups(&observations, rules)
}

pub fn write_rankings_csv<W: Write>(
    writer: W,
    rankings: &[TrendCountRanking],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["unit", "metric", "count", "rank"])?;
    for ranking in rankings {
        for unit in &ranking.top {
            w.write_record([
                unit.name.clone(),
                ranking.metric.clone(),
                unit.count.to_string(),
                unit.rank.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of the degradation/rejuvenation report. The CSV form carries the
/// printed-table columns; the JSON form also carries the exact gains and the
/// experiments the slopes came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgingReportRow {
    pub activity: String,
    pub slope_ms_per_s: f64,
    pub lt_increase_ms: f64,
    pub ttaf_h: f64,
    pub slope_r: f64,
    pub lt_increase_r: f64,
    pub ttaf_r: f64,
    /// Rounded integer percents, as printed in the report table.
    pub gain_lt_pct: Option<i64>,
    pub gain_ttaf_pct: Option<i64>,
    pub gain_lt_pct_exact: Option<f64>,
    pub gain_ttaf_pct_exact: Option<f64>,
    #[serde(default)]
    pub experiments: Vec<String>,
}

fn aging_row(
    activity: &str,
    baseline: &DegradationProjection,
    rejuvenated: &DegradationProjection,
    experiments: Vec<String>,
) -> AgingReportRow {
    let gain = rejuvenation_gain(baseline, rejuvenated).ok();
    AgingReportRow {
        activity: activity.to_string(),
        slope_ms_per_s: baseline.slope_ms_per_s,
        lt_increase_ms: baseline.lt_increase_ms,
        ttaf_h: baseline.ttaf_hours(),
        slope_r: rejuvenated.slope_ms_per_s,
        lt_increase_r: rejuvenated.lt_increase_ms,
        ttaf_r: rejuvenated.ttaf_hours(),
        gain_lt_pct: gain.map(|g| g.rounded().0),
        gain_ttaf_pct: gain.map(|g| g.rounded().1),
        gain_lt_pct_exact: gain.map(|g| g.gain_lt_pct),
        gain_ttaf_pct_exact: gain.map(|g| g.gain_ttaf_pct),
        experiments,
    }
}

/// Builds report rows from named projection pairs.
pub fn build_aging_rows(
    pairs: &[(String, DegradationProjection, DegradationProjection)],
) -> Vec<AgingReportRow> {
    pairs
        .iter()
        .map(|(activity, base, rejv)| aging_row(activity, base, rejv, Vec::new()))
        .collect()
}

/// Builds report rows from two verdict sets: launch-time entities present in
/// the baseline are projected and matched by entity against the rejuvenated
/// set. A missing rejuvenated entity projects as a zero slope. Multiple
/// experiments per entity contribute their mean slope.
pub fn build_aging_rows_from_verdicts(
    baseline: &[VerdictRecord],
    rejuvenated: &[VerdictRecord],
    horizon_s: f64,
    threshold_ms: f64,
) -> Result<Vec<AgingReportRow>, ReportError> {
    let mean_slopes = |records: &[VerdictRecord]| -> BTreeMap<String, (f64, Vec<String>)> {
        let mut acc: BTreeMap<String, (f64, Vec<String>)> = BTreeMap::new();
        for v in records {
            if v.metric == crate::ingest::LAUNCH_METRIC {
                let e = acc.entry(v.entity.clone()).or_default();
                e.0 += v.slope;
                e.1.push(v.experiment.clone());
            }
        }
        for (sum, experiments) in acc.values_mut() {
            *sum /= experiments.len() as f64;
            experiments.sort();
        }
        acc
    };
    let base_slopes = mean_slopes(baseline);
    let rejv_slopes = mean_slopes(rejuvenated);

    let mut rows = Vec::new();
    for (entity, (slope, experiments)) in &base_slopes {
        let base = crate::aging::project_degradation(*slope, horizon_s, threshold_ms)?;
        let rejv = crate::aging::project_degradation(
            rejv_slopes.get(entity).map(|(s, _)| *s).unwrap_or(0.0),
            horizon_s,
            threshold_ms,
        )?;
        rows.push(aging_row(entity, &base, &rejv, experiments.clone()));
    }
    Ok(rows)
}

fn fmt_h(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.3}")
    }
}

fn fmt_gain(v: Option<i64>) -> String {
    match v {
        Some(g) => format!("{g:+}"),
        None => String::new(),
    }
}

pub fn write_aging_csv<W: Write>(writer: W, rows: &[AgingReportRow]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "activity",
        "slope_ms_per_s",
        "lt_increase_ms",
        "ttaf_h",
        "slope_r",
        "lt_increase_r",
        "ttaf_r",
        "gain_lt_pct",
        "gain_ttaf_pct",
    ])?;
    for r in rows {
        w.write_record([
            r.activity.clone(),
            format!("{:.6}", r.slope_ms_per_s),
            format!("{:.3}", r.lt_increase_ms),
            fmt_h(r.ttaf_h),
            format!("{:.6}", r.slope_r),
            format!("{:.3}", r.lt_increase_r),
            fmt_h(r.ttaf_r),
            fmt_gain(r.gain_lt_pct),
            fmt_gain(r.gain_ttaf_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a projection table: `activity,lt_increase_ms,ttaf_h,lt_increase_r_ms,ttaf_r_h`.
pub fn read_projection_table<R: Read>(
    reader: R,
    horizon_s: f64,
    threshold_ms: f64,
) -> Result<Vec<(String, DegradationProjection, DegradationProjection)>, ReportError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let expected = [
        "activity",
        "lt_increase_ms",
        "ttaf_h",
        "lt_increase_r_ms",
        "ttaf_r_h",
    ];
    let got: Vec<&str> = rdr.headers()?.iter().collect();
    if got != expected {
        return Err(ReportError::Format(format!(
            "expected header {}, got {}",
            expected.join(","),
            got.join(",")
        )));
    }
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let num = |i: usize| -> Result<f64, ReportError> {
            get(i)
                .parse()
                .map_err(|_| ReportError::Format(format!("non-numeric field {:?}", get(i))))
        };
        pairs.push((
            get(0),
            DegradationProjection::from_observed(num(1)?, num(2)?, horizon_s, threshold_ms),
            DegradationProjection::from_observed(num(3)?, num(4)?, horizon_s, threshold_ms),
        ));
    }
    Ok(pairs)
}

/// Canonical JSON for any serializable report payload: sorted keys.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value).expect("report serializes").to_string()
}
