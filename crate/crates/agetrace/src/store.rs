//! File-mediated pipeline stages: the normalized series store written by
//! ingestion and the verdict records written by detection.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MetricSeries, ModelError, Sample, SeriesKind};
use crate::trend::{
    detect_trend, Alpha, AutocorrRoute, Decision, TestName, TrendError, TrendVerdict,
};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("verdict record: {0}")]
    Verdict(String),
}

/// Store schema header.
pub const STORE_HEADER: [&str; 5] = ["entity", "metric", "kind", "t_s", "value"];

/// Unit attached to a metric when reading a store file (the store schema
/// does not carry units; they are fixed by the metric name).
pub fn unit_for_metric(metric: &str) -> &'static str {
    match metric {
        "launch_time_ms" => "ms",
        "pss_kb" => "kb",
        "minflt" | "majflt" => "count",
        "utime" | "stime" => "ticks",
        m if m.starts_with("gc_") => "ms",
        _ => "",
    }
}

/// Writes one experiment's series as `entity,metric,kind,t_s,value` rows.
pub fn write_store<W: Write>(writer: W, series: &[MetricSeries]) -> Result<(), StoreError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STORE_HEADER)?;
    let mut ordered: Vec<&MetricSeries> = series.iter().collect();
    ordered.sort_by(|a, b| a.entity.cmp(&b.entity).then_with(|| a.metric.cmp(&b.metric)));
    for s in ordered {
        for sample in &s.samples {
            w.write_record([
                s.entity.as_str(),
                s.metric.as_str(),
                &s.kind.to_string(),
                &sample.t.to_string(),
                &sample.value.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a store file back into series, grouped by (entity, metric).
pub fn read_store<R: Read>(reader: R) -> Result<Vec<MetricSeries>, StoreError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers: Vec<&str> = rdr.headers()?.iter().collect();
    if headers != STORE_HEADER {
        return Err(StoreError::Format(format!(
            "expected header {}, got {}",
            STORE_HEADER.join(","),
            headers.join(",")
        )));
    }
    let mut groups: BTreeMap<(String, String), (SeriesKind, Vec<Sample>)> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("").trim();
        let kind: SeriesKind = get(2)
            .parse()
            .map_err(|_| StoreError::Format(format!("bad kind {:?}", get(2))))?;
        let t: f64 = get(3)
            .parse()
            .map_err(|_| StoreError::Format(format!("bad t_s {:?}", get(3))))?;
        let value: f64 = get(4)
            .parse()
            .map_err(|_| StoreError::Format(format!("bad value {:?}", get(4))))?;
        let entry = groups
            .entry((get(0).to_string(), get(1).to_string()))
            .or_insert((kind, Vec::new()));
        entry.1.push(Sample { t, value });
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((entity, metric), (kind, mut samples)) in groups {
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        let unit = unit_for_metric(&metric);
        out.push(MetricSeries::new(entity, metric, unit, kind, samples)?);
    }
    Ok(out)
}

/// JSON has no representation for non-finite floats (a perfect-fit t
/// statistic is infinite); they travel as null and come back as NaN.
mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// One test entry of a verdict record, with the wire field names. `p` is
/// present exactly when the test derives one (Durbin-Watson does not).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub name: TestName,
    #[serde(with = "nullable_f64")]
    pub stat: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<f64>,
    pub decision: Decision,
}

/// A trend verdict tied to its experiment and series coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub series_id: String,
    pub experiment: String,
    pub entity: String,
    pub metric: String,
    pub n: usize,
    pub route: AutocorrRoute,
    pub dw: f64,
    pub tests: Vec<TestEntry>,
    pub declared: bool,
    pub slope: f64,
    pub ci95: [f64; 2],
    pub intercept: f64,
    /// True when a cumulative counter was converted to per-interval rates
    /// before trend testing.
    pub rate_converted: bool,
}

impl VerdictRecord {
    pub fn new(
        experiment: &str,
        entity: &str,
        metric: &str,
        verdict: &TrendVerdict,
        rate_converted: bool,
    ) -> Self {
        Self {
            series_id: format!("{experiment}/{entity}/{metric}"),
            experiment: experiment.to_string(),
            entity: entity.to_string(),
            metric: metric.to_string(),
            n: verdict.n,
            route: verdict.route,
            dw: verdict.dw_statistic,
            tests: verdict
                .tests
                .iter()
                .map(|t| TestEntry {
                    name: t.test,
                    stat: t.statistic,
                    p: t.p_value,
                    decision: t.decision,
                })
                .collect(),
            declared: verdict.declared,
            slope: verdict.sen.slope,
            ci95: [verdict.sen.ci_low, verdict.sen.ci_high],
            intercept: verdict.sen.intercept,
            rate_converted,
        }
    }

    pub fn p_of(&self, name: TestName) -> Option<f64> {
        self.tests.iter().find(|t| t.name == name).and_then(|t| t.p)
    }

    /// Canonical JSON: object keys sorted, one line.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_value(self)
            .expect("verdict serializes")
            .to_string()
    }
}

/// Runs the battery on one series, converting cumulative counters to rate
/// series first.
pub fn analyze_series(
    experiment: &str,
    series: &MetricSeries,
    alpha: Alpha,
) -> Result<VerdictRecord, TrendError> {
    let (verdict, rate_converted) = match series.kind {
        SeriesKind::Cumulative => {
            let rates = crate::model::to_rate_series(series).map_err(|_| TrendError::TooShort {
                need: 2,
                got: series.len(),
            })?;
            (detect_trend(&rates, alpha)?, true)
        }
        SeriesKind::Instantaneous => (detect_trend(series, alpha)?, false),
    };
    Ok(VerdictRecord::new(
        experiment,
        &series.entity,
        &series.metric,
        &verdict,
        rate_converted,
    ))
}

/// Writes verdicts as canonical JSON, one record per line.
pub fn write_verdicts_jsonl<W: Write>(
    mut writer: W,
    verdicts: &[VerdictRecord],
) -> Result<(), StoreError> {
    for v in verdicts {
        writeln!(writer, "{}", v.to_canonical_json())?;
    }
    Ok(())
}

pub fn read_verdicts_jsonl<R: BufRead>(reader: R) -> Result<Vec<VerdictRecord>, StoreError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: VerdictRecord = serde_json::from_str(&line)
            .map_err(|e| StoreError::Verdict(format!("line {}: {e}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

/// Verdict CSV header (the tabular form of the verdict records).
pub const VERDICT_CSV_HEADER: [&str; 17] = [
    "series_id",
    "experiment",
    "entity",
    "metric",
    "n",
    "route",
    "dw",
    "declared",
    "slope",
    "ci_lo",
    "ci_hi",
    "intercept",
    "mk_p",
    "cox_stuart_p",
    "t_test_p",
    "spearman_p",
    "rate_converted",
];

pub fn write_verdicts_csv<W: Write>(
    writer: W,
    verdicts: &[VerdictRecord],
) -> Result<(), StoreError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(VERDICT_CSV_HEADER)?;
    for v in verdicts {
        let route = match v.route {
            AutocorrRoute::PlainMk => "plain_MK",
            AutocorrRoute::ModifiedMk => "modified_MK",
        };
        let mk_p = v
            .p_of(TestName::MannKendall)
            .or_else(|| v.p_of(TestName::MannKendallHamedRao));
        let fmt_p = |p: Option<f64>| p.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([
            v.series_id.clone(),
            v.experiment.clone(),
            v.entity.clone(),
            v.metric.clone(),
            v.n.to_string(),
            route.to_string(),
            v.dw.to_string(),
            v.declared.to_string(),
            v.slope.to_string(),
            v.ci95[0].to_string(),
            v.ci95[1].to_string(),
            v.intercept.to_string(),
            fmt_p(mk_p),
            fmt_p(v.p_of(TestName::CoxStuart)),
            fmt_p(v.p_of(TestName::TTest)),
            fmt_p(v.p_of(TestName::SpearmanRho)),
            v.rate_converted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SeriesKind;

    fn series(entity: &str, metric: &str, kind: SeriesKind, values: &[f64]) -> MetricSeries {
        MetricSeries::new(
            entity,
            metric,
            unit_for_metric(metric),
            kind,
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
    fn store_round_trip() {
        let input = vec![
            series("all_activities", "launch_time_ms", SeriesKind::Instantaneous, &[100.0, 120.0, 140.0]),
            series("1/2/Task", "utime", SeriesKind::Cumulative, &[5.0, 9.0, 12.0]),
        ];
        let mut buf = Vec::new();
        write_store(&mut buf, &input).unwrap();
        let back = read_store(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        let task = back.iter().find(|s| s.metric == "utime").unwrap();
        assert_eq!(task.kind, SeriesKind::Cumulative);
        assert_eq!(task.values(), vec![5.0, 9.0, 12.0]);
    }

    #[test]
    fn store_rejects_wrong_header() {
        assert!(matches!(
            read_store("a,b,c\n".as_bytes()),
            Err(StoreError::Format(_))
        ));
    }

    #[test]
    fn analyze_converts_cumulative_to_rates() {
        // Convex cumulative counter: rates increase linearly.
        let values: Vec<f64> = (1..=30).map(|i| (i * i) as f64).collect();
        let s = series("1/2/T", "utime", SeriesKind::Cumulative, &values);
        let v = analyze_series("EXP1", &s, Alpha::default()).unwrap();
        assert!(v.rate_converted);
        assert_eq!(v.n, 29);
        assert!(v.declared);
        assert!(v.slope > 0.0);
    }

    #[test]
    fn verdict_jsonl_round_trip_and_canonical_keys() {
        let s = series(
            "all_activities",
            "launch_time_ms",
            SeriesKind::Instantaneous,
            &(0..20)
                .map(|i| 100.0 + i as f64 + ((i * 13) % 7) as f64)
                .collect::<Vec<_>>(),
        );
        let v = analyze_series("EXP1", &s, Alpha::default()).unwrap();
        let json = v.to_canonical_json();
        // Spec wire keys present.
        for key in ["series_id", "\"n\"", "route", "\"dw\"", "tests", "declared", "slope", "ci95"] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        // Keys sorted: canonical form is reproducible.
        assert_eq!(json, v.to_canonical_json());

        let mut buf = Vec::new();
        write_verdicts_jsonl(&mut buf, std::slice::from_ref(&v)).unwrap();
        let back = read_verdicts_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![v]);
    }

    #[test]
    fn verdict_csv_has_contract_header() {
        let s = series(
            "system",
            "pss_kb",
            SeriesKind::Instantaneous,
            &(0..15).map(|i| 1000.0 + (i % 4) as f64).collect::<Vec<_>>(),
        );
        let v = analyze_series("EXP2", &s, Alpha::default()).unwrap();
        let mut buf = Vec::new();
        write_verdicts_csv(&mut buf, &[v]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("series_id,experiment,entity,metric,n,route,dw,declared,slope"));
        assert!(text.contains("EXP2/system/pss_kb"));
    }
}
