//! Detection and quantification of software aging from device telemetry.
//!
//! The crate ingests launch-time, memory, garbage-collection, and task-level
//! metric streams, runs a statistical trend-detection battery (Mann-Kendall
//! with Hamed-Rao variance correction, Cox-Stuart, regression t-test,
//! Spearman's rho, routed by a Durbin-Watson autocorrelation check) with
//! Sen's slope estimation, compares aging across experimental factors with a
//! routed one-way ANOVA, ranks aging-prone components by trend occurrences,
//! and computes time-to-aging-failure and rejuvenation-gain metrics.
//!
//! Pipeline stages are file-mediated and exposed by the `agetrace` CLI:
//! raw telemetry -> series store -> trend verdicts -> reports.

pub mod aging;
pub mod groupstats;
pub mod ingest;
pub mod model;
pub mod report;
pub mod stats;
pub mod store;
pub mod synth;
pub mod trend;

pub use model::{
    ExperimentConfig, ExperimentPlan, Factor, MetricSeries, Sample, SeriesKind,
};
pub use trend::{Alpha, TrendVerdict};
