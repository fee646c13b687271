//! Domain types for experiments, factors, and metric time series, plus plan
//! partitioning for factor analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled experimental plan: 72 six-hour experiments over the five factors.
pub const PLAN72_CSV: &str = include_str!("../data/plan72.csv");

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown factor name: {0}")]
    UnknownFactor(String),
    #[error("duplicate experiment id: {0}")]
    DuplicateId(String),
    #[error("experiment {0}: duration must be > 0")]
    NonPositiveDuration(String),
    #[error("factor {factor} has a single level ({level}) in the plan")]
    SingleLevel { factor: Factor, level: String },
    #[error("experiment {id} has no counterpart at {factor}={level}")]
    UnpairedConfig {
        id: String,
        factor: Factor,
        level: String,
    },
    #[error("series too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("series is not {0:?}")]
    WrongKind(SeriesKind),
    #[error("sample {index}: timestamps must be strictly increasing")]
    NonIncreasingTime { index: usize },
    #[error("sample {index}: value must be finite")]
    NonFiniteValue { index: usize },
    #[error("sample {index}: cumulative counters cannot be negative")]
    NegativeCumulative { index: usize },
    #[error("plan manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The five experimental factors of the test plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Factor {
    Dev,
    Ver,
    App,
    Events,
    Sto,
}

impl Factor {
    pub const ALL: [Factor; 5] = [
        Factor::Dev,
        Factor::Ver,
        Factor::App,
        Factor::Events,
        Factor::Sto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Factor::Dev => "DEV",
            Factor::Ver => "VER",
            Factor::App => "APP",
            Factor::Events => "EVENTS",
            Factor::Sto => "STO",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Factor {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "DEV" => Ok(Factor::Dev),
            "VER" => Ok(Factor::Ver),
            "APP" => Ok(Factor::App),
            "EVENTS" => Ok(Factor::Events),
            "STO" => Ok(Factor::Sto),
            other => Err(ModelError::UnknownFactor(other.to_string())),
        }
    }
}

/// One experiment of a plan: a level for each factor plus a duration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub dev: String,
    pub ver: String,
    pub app: String,
    pub events: String,
    pub sto: String,
    /// Experiment duration in seconds.
    pub duration_s: u64,
}

impl ExperimentConfig {
    pub fn level(&self, factor: Factor) -> &str {
        match factor {
            Factor::Dev => &self.dev,
            Factor::Ver => &self.ver,
            Factor::App => &self.app,
            Factor::Events => &self.events,
            Factor::Sto => &self.sto,
        }
    }

    /// Levels of all factors except `factor`, used for exact-match pairing.
    fn residual_key(&self, factor: Factor) -> Vec<&str> {
        Factor::ALL
            .iter()
            .filter(|f| **f != factor)
            .map(|f| self.level(*f))
            .collect()
    }
}

/// An ordered set of experiment configurations with derived level sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    experiments: Vec<ExperimentConfig>,
    level_sets: BTreeMap<Factor, BTreeSet<String>>,
}

impl ExperimentPlan {
    pub fn new(experiments: Vec<ExperimentConfig>) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        let mut level_sets: BTreeMap<Factor, BTreeSet<String>> = BTreeMap::new();
        for cfg in &experiments {
            if !seen.insert(cfg.id.clone()) {
                return Err(ModelError::DuplicateId(cfg.id.clone()));
            }
            if cfg.duration_s == 0 {
                return Err(ModelError::NonPositiveDuration(cfg.id.clone()));
            }
            for f in Factor::ALL {
                level_sets
                    .entry(f)
                    .or_default()
                    .insert(cfg.level(f).to_string());
            }
        }
        Ok(Self {
            experiments,
            level_sets,
        })
    }

    /// The plan of the bundled 72-experiment manifest.
    pub fn bundled() -> Self {
        Self::from_csv(PLAN72_CSV.as_bytes()).expect("bundled plan manifest is valid")
    }

    pub fn experiments(&self) -> &[ExperimentConfig] {
        &self.experiments
    }

    pub fn get(&self, id: &str) -> Option<&ExperimentConfig> {
        self.experiments.iter().find(|c| c.id == id)
    }

    pub fn levels(&self, factor: Factor) -> &BTreeSet<String> {
        &self.level_sets[&factor]
    }

    pub fn len(&self) -> usize {
        self.experiments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiments.is_empty()
    }

    /// Sub-plan keeping only configs for which `keep` returns true.
    pub fn restricted(&self, keep: impl Fn(&ExperimentConfig) -> bool) -> Self {
        Self::new(
            self.experiments
                .iter()
                .filter(|c| keep(c))
                .cloned()
                .collect(),
        )
        .expect("restriction preserves plan invariants")
    }

    /// Reads a plan manifest with header `id,dev,ver,app,events,sto,duration_s`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, ModelError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["id", "dev", "ver", "app", "events", "sto", "duration_s"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(ModelError::Manifest(format!(
                "expected header {:?}, got {:?}",
                expected.join(","),
                got.join(",")
            )));
        }
        let mut experiments = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
            let duration_s = field(6)
                .parse::<u64>()
                .map_err(|e| ModelError::Manifest(format!("bad duration_s: {e}")))?;
            experiments.push(ExperimentConfig {
                id: field(0),
                dev: field(1),
                ver: field(2),
                app: field(3),
                events: field(4),
                sto: field(5),
                duration_s,
            });
        }
        Self::new(experiments)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), ModelError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["id", "dev", "ver", "app", "events", "sto", "duration_s"])?;
        for c in &self.experiments {
            wtr.write_record([
                c.id.as_str(),
                &c.dev,
                &c.ver,
                &c.app,
                &c.events,
                &c.sto,
                &c.duration_s.to_string(),
            ])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Two equal-size partitions of a plan differing only in one factor,
/// with the exact pairing between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorPartition {
    pub factor: Factor,
    pub level_a: String,
    pub level_b: String,
    pub group_a: Vec<String>,
    pub group_b: Vec<String>,
    /// (id at level_a, id at level_b) pairs sharing all other factor levels.
    pub pairs: Vec<(String, String)>,
}

/// Splits a plan into paired partitions along one factor.
///
/// Each config at one level must have exactly one counterpart at the other
/// level that matches on every remaining factor. With more than two levels,
/// one partition per unordered level pair is returned.
pub fn partition_by_factor(
    plan: &ExperimentPlan,
    factor: Factor,
) -> Result<Vec<FactorPartition>, ModelError> {
    let levels: Vec<String> = plan.levels(factor).iter().cloned().collect();
    if levels.len() < 2 {
        return Err(ModelError::SingleLevel {
            factor,
            level: levels.first().cloned().unwrap_or_default(),
        });
    }

    let mut partitions = Vec::new();
    for (i, level_a) in levels.iter().enumerate() {
        for level_b in &levels[i + 1..] {
            let side_a: Vec<&ExperimentConfig> = plan
                .experiments()
                .iter()
                .filter(|c| c.level(factor) == level_a)
                .collect();
            let mut by_key: BTreeMap<Vec<&str>, Vec<&ExperimentConfig>> = BTreeMap::new();
            for c in plan
                .experiments()
                .iter()
                .filter(|c| c.level(factor) == level_b)
            {
                by_key.entry(c.residual_key(factor)).or_default().push(c);
            }

            let mut pairs = Vec::new();
            for a in &side_a {
                // Exactly one counterpart, and each counterpart claimed once.
                let counterpart = match by_key.get_mut(&a.residual_key(factor)) {
                    Some(v) if v.len() == 1 => v.pop(),
                    _ => None,
                };
                match counterpart {
                    Some(b) => pairs.push((a.id.clone(), b.id.clone())),
                    None => {
                        return Err(ModelError::UnpairedConfig {
                            id: a.id.clone(),
                            factor,
                            level: level_b.clone(),
                        })
                    }
                }
            }
            // Every level-b config must have been claimed by a level-a one.
            if let Some(b) = by_key.values().flatten().next() {
                return Err(ModelError::UnpairedConfig {
                    id: b.id.clone(),
                    factor,
                    level: level_a.clone(),
                });
            }

            partitions.push(FactorPartition {
                factor,
                level_a: level_a.clone(),
                level_b: level_b.clone(),
                group_a: pairs.iter().map(|(a, _)| a.clone()).collect(),
                group_b: pairs.iter().map(|(_, b)| b.clone()).collect(),
                pairs,
            });
        }
    }
    Ok(partitions)
}

/// One timestamped observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Seconds since experiment start.
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Instantaneous,
    Cumulative,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesKind::Instantaneous => "instantaneous",
            SeriesKind::Cumulative => "cumulative",
        })
    }
}

impl FromStr for SeriesKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "instantaneous" => Ok(SeriesKind::Instantaneous),
            "cumulative" => Ok(SeriesKind::Cumulative),
            other => Err(ModelError::Manifest(format!("unknown series kind {other:?}"))),
        }
    }
}

/// Flags attached to individual samples during ingestion or conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    /// A cumulative counter decreased; the delta was replaced by the raw value.
    CounterReset,
    /// A duplicate timestamp was perturbed by +1 ms to keep ranks defined.
    PerturbedTimestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub index: usize,
    pub kind: AnnotationKind,
}

/// A timestamped sequence of one metric for one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    /// Activity id, process name, or `pid/tid/task_name`.
    pub entity: String,
    pub metric: String,
    pub unit: String,
    pub kind: SeriesKind,
    pub samples: Vec<Sample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
}

impl MetricSeries {
    pub fn new(
        entity: impl Into<String>,
        metric: impl Into<String>,
        unit: impl Into<String>,
        kind: SeriesKind,
        samples: Vec<Sample>,
    ) -> Result<Self, ModelError> {
        let series = Self {
            entity: entity.into(),
            metric: metric.into(),
            unit: unit.into(),
            kind,
            samples,
            annotations: Vec::new(),
        };
        series.validate()?;
        Ok(series)
    }

    fn validate(&self) -> Result<(), ModelError> {
        for (i, s) in self.samples.iter().enumerate() {
            if !s.value.is_finite() {
                return Err(ModelError::NonFiniteValue { index: i });
            }
            if self.kind == SeriesKind::Cumulative && s.value < 0.0 {
                return Err(ModelError::NegativeCumulative { index: i });
            }
            if s.t < 0.0 || !s.t.is_finite() {
                return Err(ModelError::NonIncreasingTime { index: i });
            }
            if i > 0 && s.t <= self.samples[i - 1].t {
                return Err(ModelError::NonIncreasingTime { index: i });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }

    /// `entity/metric`, the series identifier used in verdicts and reports.
    pub fn id(&self) -> String {
        format!("{}/{}", self.entity, self.metric)
    }
}

/// Converts a cumulative counter series into per-interval deltas.
///
/// The delta at `t_i` is `value_i - value_{i-1}`. A negative delta marks a
/// counter reset: the raw new value is kept and the sample is flagged so
/// downstream analyses can exclude or accept it explicitly.
pub fn to_rate_series(series: &MetricSeries) -> Result<MetricSeries, ModelError> {
    if series.kind != SeriesKind::Cumulative {
        return Err(ModelError::WrongKind(SeriesKind::Cumulative));
    }
    if series.len() < 2 {
        return Err(ModelError::TooShort {
            need: 2,
            got: series.len(),
        });
    }
    let mut samples = Vec::with_capacity(series.len() - 1);
    let mut annotations = Vec::new();
    for (i, pair) in series.samples.windows(2).enumerate() {
        let delta = pair[1].value - pair[0].value;
        let value = if delta < 0.0 {
            annotations.push(Annotation {
                index: i,
                kind: AnnotationKind::CounterReset,
            });
            pair[1].value
        } else {
            delta
        };
        samples.push(Sample {
            t: pair[1].t,
            value,
        });
    }
    Ok(MetricSeries {
        entity: series.entity.clone(),
        metric: series.metric.clone(),
        unit: series.unit.clone(),
        kind: SeriesKind::Instantaneous,
        samples,
        annotations,
    })
}
