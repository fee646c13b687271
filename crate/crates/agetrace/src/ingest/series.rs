//! Assembly of parsed telemetry events into metric series.

use std::collections::BTreeMap;

use crate::ingest::EventBatch;
use crate::model::{Annotation, AnnotationKind, MetricSeries, Sample, SeriesKind};

/// Entity name of the series pooling the launch times of all activities.
pub const ALL_ACTIVITIES: &str = "all_activities";

pub const LAUNCH_METRIC: &str = "launch_time_ms";
pub const PSS_METRIC: &str = "pss_kb";

/// Entity string for a task series.
pub fn task_entity(pid: u32, tid: u32, name: &str) -> String {
    format!("{pid}/{tid}/{name}")
}

/// Metric name for a GC series, e.g. `gc_duration_explicit`.
pub fn gc_metric(kind: &str, cause: &crate::ingest::GcCause) -> String {
    format!("gc_{kind}_{}", cause.label())
}

struct SeriesBuilder {
    entity: String,
    metric: String,
    unit: &'static str,
    kind: SeriesKind,
    points: Vec<(f64, f64)>,
}

impl SeriesBuilder {
    fn push(&mut self, t: f64, value: f64) {
        self.points.push((t, value));
    }

    /// Sorts by time and perturbs duplicate timestamps by +1 ms so that
    /// rank-based tests stay well-defined; perturbed samples are flagged.
    fn finish(mut self) -> MetricSeries {
        self.points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut samples = Vec::with_capacity(self.points.len());
        let mut annotations = Vec::new();
        let mut prev_t = f64::NEG_INFINITY;
        for (i, (t, value)) in self.points.into_iter().enumerate() {
            let t = if t <= prev_t {
                annotations.push(Annotation {
                    index: i,
                    kind: AnnotationKind::PerturbedTimestamp,
                });
                prev_t + 0.001
            } else {
                t
            };
            prev_t = t;
            samples.push(Sample { t, value });
        }
        MetricSeries {
            entity: self.entity,
            metric: self.metric,
            unit: self.unit.to_string(),
            kind: self.kind,
            samples,
            annotations,
        }
    }
}

/// Builds one series per (entity, metric) from an event batch.
///
/// Launch events are pooled into an `all_activities` series and also split
/// per activity; GC events yield duration and pause series per (process,
/// cause); PSS snapshots one series per process; task counters one
/// cumulative series per (task, counter).
pub fn build_series(batch: &EventBatch) -> Vec<MetricSeries> {
    let mut builders: BTreeMap<(String, String), SeriesBuilder> = BTreeMap::new();
    let mut add = |entity: &str, metric: &str, unit: &'static str, kind: SeriesKind, t: f64, value: f64| {
        builders
            .entry((entity.to_string(), metric.to_string()))
            .or_insert_with(|| SeriesBuilder {
                entity: entity.to_string(),
                metric: metric.to_string(),
                unit,
                kind,
                points: Vec::new(),
            })
            .push(t, value);
    };

    for event in &batch.launches {
        let value = event.launch_time_ms;
        add(ALL_ACTIVITIES, LAUNCH_METRIC, "ms", SeriesKind::Instantaneous, event.t, value);
        add(&event.activity, LAUNCH_METRIC, "ms", SeriesKind::Instantaneous, event.t, value);
    }

    for gc in &batch.gcs {
        let duration = gc_metric("duration", &gc.cause);
        let pause = gc_metric("pause", &gc.cause);
        add(&gc.process, &duration, "ms", SeriesKind::Instantaneous, gc.t, gc.total_ms);
        add(&gc.process, &pause, "ms", SeriesKind::Instantaneous, gc.t, gc.pause_total_ms());
    }

    for pss in &batch.pss {
        add(&pss.process, PSS_METRIC, "kb", SeriesKind::Instantaneous, pss.t, pss.pss_kb);
    }

    for task in &batch.tasks {
        let entity = task_entity(task.pid, task.tid, &task.task_name);
        add(&entity, "minflt", "count", SeriesKind::Cumulative, task.t, task.minflt as f64);
        add(&entity, "majflt", "count", SeriesKind::Cumulative, task.t, task.majflt as f64);
        add(&entity, "utime", "ticks", SeriesKind::Cumulative, task.t, task.utime_ticks as f64);
        add(&entity, "stime", "ticks", SeriesKind::Cumulative, task.t, task.stime_ticks as f64);
    }

    builders.into_values().map(SeriesBuilder::finish).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{GcCause, GcEvent, LaunchEvent, PssSample, TaskSample};

    fn launch(t: f64, activity: &str, ms: f64) -> LaunchEvent {
        LaunchEvent {
            t,
            activity: activity.to_string(),
            launch_time_ms: ms,
        }
    }

    #[test]
    fn launches_pool_and_split() {
        let batch = EventBatch {
            launches: vec![
                launch(60.0, "com.a/.A", 100.0),
                launch(120.0, "com.b/.B", 200.0),
                launch(180.0, "com.a/.A", 150.0),
            ],
            ..Default::default()
        };
        let series = build_series(&batch);
        assert_eq!(series.len(), 3);
        let pooled = series.iter().find(|s| s.entity == ALL_ACTIVITIES).unwrap();
        assert_eq!(pooled.len(), 3);
        let a = series.iter().find(|s| s.entity == "com.a/.A").unwrap();
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn gc_series_grouped_by_process_and_cause() {
        let gc = |cause: GcCause, process: &str, t: f64| GcEvent {
            t,
            process: process.to_string(),
            cause,
            algorithm: "concurrent mark sweep".to_string(),
            freed_objects: 1,
            freed_bytes: 1024,
            los_objects: 0,
            los_bytes: 0,
            pause_ms: vec![1.0, 2.0],
            total_ms: 50.0,
        };
        let batch = EventBatch {
            gcs: vec![
                gc(GcCause::Explicit, "system", 10.0),
                gc(GcCause::Background, "system", 20.0),
                gc(GcCause::Explicit, "mediaserver", 30.0),
            ],
            ..Default::default()
        };
        let series = build_series(&batch);
        let metrics: Vec<String> = series.iter().map(|s| s.id()).collect();
        assert!(metrics.contains(&"system/gc_duration_explicit".to_string()));
        assert!(metrics.contains(&"system/gc_pause_explicit".to_string()));
        assert!(metrics.contains(&"system/gc_duration_background".to_string()));
        assert!(metrics.contains(&"mediaserver/gc_duration_explicit".to_string()));
        let pause = series
            .iter()
            .find(|s| s.id() == "system/gc_pause_explicit")
            .unwrap();
        assert_eq!(pause.values(), vec![3.0]);
    }

    #[test]
    fn task_counters_are_cumulative_per_tid() {
        let task = |t: f64, tid: u32, utime: u64| TaskSample {
            t,
            pid: 1097,
            tid,
            task_name: "ActivityManager".to_string(),
            minflt: 1,
            majflt: 2,
            utime_ticks: utime,
            stime_ticks: 4,
        };
        let batch = EventBatch {
            tasks: vec![task(30.0, 5, 10), task(60.0, 5, 12), task(30.0, 6, 1)],
            ..Default::default()
        };
        let series = build_series(&batch);
        // 4 metrics x 2 tids.
        assert_eq!(series.len(), 8);
        let utime = series
            .iter()
            .find(|s| s.entity == "1097/5/ActivityManager" && s.metric == "utime")
            .unwrap();
        assert_eq!(utime.kind, SeriesKind::Cumulative);
        assert_eq!(utime.values(), vec![10.0, 12.0]);
    }

    #[test]
    fn duplicate_timestamps_perturbed_and_flagged() {
        let batch = EventBatch {
            pss: vec![
                PssSample {
                    t: 30.0,
                    process: "system".to_string(),
                    pid: 1,
                    pss_kb: 10.0,
                },
                PssSample {
                    t: 30.0,
                    process: "system".to_string(),
                    pid: 1,
                    pss_kb: 11.0,
                },
            ],
            ..Default::default()
        };
        let series = build_series(&batch);
        let s = &series[0];
        assert_eq!(s.samples[0].t, 30.0);
        assert_eq!(s.samples[1].t, 30.001);
        assert_eq!(s.annotations.len(), 1);
        assert_eq!(s.annotations[0].kind, AnnotationKind::PerturbedTimestamp);
        // Strictly increasing after perturbation.
        assert!(s.samples.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn empty_batch_empty_output() {
        assert!(build_series(&EventBatch::default()).is_empty());
    }
}
