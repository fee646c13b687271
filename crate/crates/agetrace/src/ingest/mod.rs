//! Raw telemetry parsing: Activity Manager launch logs, ART GC logs, PSS
//! snapshots, and procfs task stats, normalized into metric series.

mod logcat;
mod series;
mod tables;

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use logcat::{
    parse_displayed_line, parse_duration_ms, parse_gc_line, split_logcat_line, LogcatLine,
};
pub use series::{build_series, gc_metric, task_entity, ALL_ACTIVITIES, LAUNCH_METRIC, PSS_METRIC};
pub use tables::{extract_dumpsys_pss, parse_pss_csv, parse_task_stat_line, parse_tasks_csv};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("Displayed line with unparseable duration: {line}")]
    MalformedDuration { line: String },
    #[error("art GC line with missing or malformed fields: {line}")]
    MalformedGcLine { line: String },
    #[error("bad header: expected {expected}, got {got}")]
    BadHeader { expected: String, got: String },
    #[error("row {row}: field {field} is not numeric ({value:?})")]
    NonNumericField {
        row: usize,
        field: String,
        value: String,
    },
    #[error("malformed stat line: {line}")]
    MalformedStatLine { line: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A parsed Activity Manager launch record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchEvent {
    pub t: f64,
    pub activity: String,
    pub launch_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GcCause {
    Explicit,
    Background,
    Concurrent,
    Other(String),
}

impl GcCause {
    /// Lower-case label used in metric names.
    pub fn label(&self) -> String {
        match self {
            GcCause::Explicit => "explicit".to_string(),
            GcCause::Background => "background".to_string(),
            GcCause::Concurrent => "concurrent".to_string(),
            GcCause::Other(s) => s.to_ascii_lowercase().replace(' ', "_"),
        }
    }

    /// The leading token of the log line.
    pub fn word(&self) -> &str {
        match self {
            GcCause::Explicit => "Explicit",
            GcCause::Background => "Background",
            GcCause::Concurrent => "Concurrent",
            GcCause::Other(s) => s,
        }
    }
}

/// A parsed ART garbage-collection record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcEvent {
    pub t: f64,
    pub process: String,
    pub cause: GcCause,
    pub algorithm: String,
    pub freed_objects: u64,
    pub freed_bytes: u64,
    pub los_objects: u64,
    pub los_bytes: u64,
    pub pause_ms: Vec<f64>,
    pub total_ms: f64,
}

impl GcEvent {
    /// Sum of the pause entries; the pause metric used for trend analysis.
    pub fn pause_total_ms(&self) -> f64 {
        self.pause_ms.iter().sum()
    }
}

/// One PSS memory snapshot of a process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PssSample {
    pub t: f64,
    pub process: String,
    pub pid: u32,
    pub pss_kb: f64,
}

/// One procfs stat snapshot of a task (cumulative counters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSample {
    pub t: f64,
    pub pid: u32,
    pub tid: u32,
    pub task_name: String,
    pub minflt: u64,
    pub majflt: u64,
    pub utime_ticks: u64,
    pub stime_ticks: u64,
}

/// All events parsed from one experiment's capture.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventBatch {
    pub launches: Vec<LaunchEvent>,
    pub gcs: Vec<GcEvent>,
    pub pss: Vec<PssSample>,
    pub tasks: Vec<TaskSample>,
}

impl EventBatch {
    pub fn record_count(&self) -> usize {
        self.launches.len() + self.gcs.len() + self.pss.len() + self.tasks.len()
    }
}

/// Per-file ingestion counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub lines: usize,
    pub records: usize,
    /// Lines that matched no recognized grammar.
    pub skipped: usize,
    /// Lines that matched a grammar but failed field extraction.
    pub malformed: Vec<String>,
    /// Lines containing bytes that were not valid text.
    pub encoding_warnings: usize,
}

/// Parses a whole logcat capture into launch and GC events.
///
/// Threadtime prefixes supply per-line timestamps; without a prefix the line
/// number (one second per line) is used as capture time. GC events are
/// attributed to a process via `pid_to_process` when the line carries a pid,
/// falling back to `pid<PID>` or `"unknown"`. Undecodable bytes are replaced
/// and counted, never fatal.
pub fn ingest_logcat<R: BufRead>(
    reader: R,
    pid_to_process: &BTreeMap<u32, String>,
) -> Result<(Vec<LaunchEvent>, Vec<GcEvent>, IngestStats), IngestError> {
    let mut launches = Vec::new();
    let mut gcs = Vec::new();
    let mut stats = IngestStats::default();

    let mut raw = Vec::new();
    let mut reader = reader;
    reader.read_to_end(&mut raw)?;
    let text = String::from_utf8_lossy(&raw);

    for (i, line) in text.lines().enumerate() {
        stats.lines += 1;
        if line.contains('\u{FFFD}') {
            stats.encoding_warnings += 1;
        }
        let fallback_t = i as f64;
        match parse_displayed_line(line, fallback_t) {
            Ok(Some(event)) => {
                launches.push(event);
                stats.records += 1;
                continue;
            }
            Ok(None) => {}
            Err(e) => {
                stats.malformed.push(e.to_string());
                continue;
            }
        }
        let split = split_logcat_line(line);
        let process = split
            .pid
            .map(|pid| {
                pid_to_process
                    .get(&pid)
                    .cloned()
                    .unwrap_or_else(|| format!("pid{pid}"))
            })
            .unwrap_or_else(|| "unknown".to_string());
        match parse_gc_line(line, fallback_t, &process) {
            Ok(Some(event)) => {
                gcs.push(event);
                stats.records += 1;
            }
            Ok(None) => stats.skipped += 1,
            Err(e) => stats.malformed.push(e.to_string()),
        }
    }
    Ok((launches, gcs, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logcat_file_with_both_listings() {
        let text = "I/ActivityManager(1097): Displayed com.example.myapp/.MainActivity: +100ms\n\
                    I/art: Explicit concurrent mark sweep GC freed 104710(7MB) AllocSpace objects, \
                    21(416KB) LOS objects, 33% free, 25MB/38MB, paused 1.230ms total 67.216ms\n\
                    I/WindowManager( 800): some unrelated line\n";
        let (launches, gcs, stats) = ingest_logcat(text.as_bytes(), &BTreeMap::new()).unwrap();
        assert_eq!(launches.len(), 1);
        assert_eq!(launches[0].launch_time_ms, 100.0);
        assert_eq!(gcs.len(), 1);
        assert_eq!(gcs[0].total_ms, 67.216);
        assert_eq!(stats.records, 2);
        assert_eq!(stats.skipped, 1);
    }

    #[test]
    fn gc_process_resolution_via_pid_map() {
        let text = "01-01 00:02:00.000  1097  1134 I art: Explicit concurrent mark sweep GC \
                    freed 1(1KB) AllocSpace objects, 0(0B) LOS objects, 10% free, paused 1.000ms \
                    total 2.000ms\n";
        let mut map = BTreeMap::new();
        map.insert(1097, "system".to_string());
        let (_, gcs, _) = ingest_logcat(text.as_bytes(), &map).unwrap();
        assert_eq!(gcs[0].process, "system");
        assert_eq!(gcs[0].t, 120.0);

        let (_, gcs, _) = ingest_logcat(text.as_bytes(), &BTreeMap::new()).unwrap();
        assert_eq!(gcs[0].process, "pid1097");
    }

    #[test]
    fn undecodable_bytes_are_counted_not_fatal() {
        let mut bytes = b"I/ActivityManager(1): Displayed com.a/.B: +10ms\n".to_vec();
        bytes.extend_from_slice(b"I/art\xff\xfe: garbage\n");
        let (launches, _, stats) = ingest_logcat(bytes.as_slice(), &BTreeMap::new()).unwrap();
        assert_eq!(launches.len(), 1);
        assert_eq!(stats.encoding_warnings, 1);
    }

    #[test]
    fn malformed_displayed_recorded_not_fatal() {
        let text = "I/ActivityManager(1): Displayed com.a/.B: +nonsense\n";
        let (launches, _, stats) = ingest_logcat(text.as_bytes(), &BTreeMap::new()).unwrap();
        assert!(launches.is_empty());
        assert_eq!(stats.malformed.len(), 1);
    }
}
