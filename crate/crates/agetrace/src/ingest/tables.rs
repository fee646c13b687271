//! Parsers for the normalized CSV captures: PSS snapshots and procfs task
//! stat lines. A best-effort extractor for raw `dumpsys meminfo` text is
//! included, but the CSV is the contract; dumpsys layout varies across OS
//! versions.

use std::io::Read;
use std::sync::LazyLock;

use regex::Regex;

use crate::ingest::{IngestError, PssSample, TaskSample};

fn check_header(got: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let got_fields: Vec<&str> = got.iter().map(str::trim).collect();
    if got_fields != expected {
        return Err(IngestError::BadHeader {
            expected: expected.join(","),
            got: got_fields.join(","),
        });
    }
    Ok(())
}

fn numeric<T: std::str::FromStr>(value: &str, row: usize, field: &str) -> Result<T, IngestError> {
    value.trim().parse().map_err(|_| IngestError::NonNumericField {
        row,
        field: field.to_string(),
        value: value.to_string(),
    })
}

/// Reads `t_s,process,pid,pss_kb` rows; output is time-ordered within each
/// process.
pub fn parse_pss_csv<R: Read>(reader: R) -> Result<Vec<PssSample>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(rdr.headers()?, &["t_s", "process", "pid", "pss_kb"])?;
    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let get = |idx: usize| record.get(idx).unwrap_or("");
        samples.push(PssSample {
            t: numeric(get(0), row, "t_s")?,
            process: get(1).trim().to_string(),
            pid: numeric(get(2), row, "pid")?,
            pss_kb: numeric(get(3), row, "pss_kb")?,
        });
    }
    samples.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(samples)
}

/// Parses one kernel `stat` line: `pid (comm) state ppid ...` with minflt,
/// majflt, utime, stime at fields 10, 12, 14, 15 (1-indexed).
///
/// The comm field may itself contain spaces or parentheses; it ends at the
/// last closing parenthesis of the line. Standalone stat lines carry no
/// separate thread id, so pid and tid are both taken from the first field.
pub fn parse_task_stat_line(line: &str, t: f64) -> Result<TaskSample, IngestError> {
    let malformed = || IngestError::MalformedStatLine {
        line: line.to_string(),
    };
    let open = line.find('(').ok_or_else(malformed)?;
    let close = line.rfind(')').ok_or_else(malformed)?;
    if close < open {
        return Err(malformed());
    }
    let pid: u32 = line[..open].trim().parse().map_err(|_| malformed())?;
    let task_name = line[open + 1..close].to_string();
    if task_name.is_empty() {
        return Err(malformed());
    }
    // Fields from `state` (field 3) onward.
    let rest: Vec<&str> = line[close + 1..].split_whitespace().collect();
    let field = |one_indexed: usize| -> Result<u64, IngestError> {
        rest.get(one_indexed - 3)
            .ok_or_else(malformed)?
            .parse()
            .map_err(|_| malformed())
    };
    Ok(TaskSample {
        t,
        pid,
        tid: pid,
        task_name,
        minflt: field(10)?,
        majflt: field(12)?,
        utime_ticks: field(14)?,
        stime_ticks: field(15)?,
    })
}

static PSS_BY_PROCESS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*([\d,]+)K:\s+(.+?)\s+\(pid\s+(\d+)[^)]*\)").unwrap());

static MEMINFO_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\*\* MEMINFO in pid (\d+) \[(.+?)\] \*\*").unwrap());

/// Best-effort extraction of per-process PSS totals from raw
/// `dumpsys meminfo` output captured at time `t`.
///
/// Two shapes are recognized: the `Total PSS by process:` summary section
/// (`  151,000K: system (pid 1097)` rows) and single-process dumps headed by
/// `** MEMINFO in pid N [name] **` whose `TOTAL` row starts with the PSS
/// column. Unrecognized text yields no samples.
pub fn extract_dumpsys_pss(text: &str, t: f64) -> Vec<PssSample> {
    let mut samples = Vec::new();
    let mut in_by_process = false;
    let mut current: Option<(u32, String)> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("Total PSS by process") {
            in_by_process = true;
            continue;
        }
        if in_by_process {
            if let Some(c) = PSS_BY_PROCESS.captures(line) {
                if let Ok(pss_kb) = c[1].replace(',', "").parse::<f64>() {
                    samples.push(PssSample {
                        t,
                        process: c[2].to_string(),
                        pid: c[3].parse().unwrap_or(0),
                        pss_kb,
                    });
                }
                continue;
            }
            // The section ends at the first non-matching, non-blank line.
            if !line.trim().is_empty() {
                in_by_process = false;
            }
        }
        if let Some(c) = MEMINFO_HEADER.captures(line) {
            current = Some((c[1].parse().unwrap_or(0), c[2].to_string()));
            continue;
        }
        if let Some((pid, process)) = &current {
            let trimmed = line.trim_start();
            if let Some(rest) = trimmed.strip_prefix("TOTAL") {
                let first = rest
                    .trim_start_matches(':')
                    .split_whitespace()
                    .next()
                    .and_then(|v| v.replace(',', "").parse::<f64>().ok());
                if let Some(pss_kb) = first {
                    samples.push(PssSample {
                        t,
                        process: process.clone(),
                        pid: *pid,
                        pss_kb,
                    });
                }
                current = None;
            }
        }
    }
    samples
}

/// Reads `t_s,pid,tid,stat_line` rows; pid/tid columns override the ids
/// embedded in the stat line.
pub fn parse_tasks_csv<R: Read>(reader: R) -> Result<Vec<TaskSample>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(rdr.headers()?, &["t_s", "pid", "tid", "stat_line"])?;
    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let get = |idx: usize| record.get(idx).unwrap_or("");
        let t: f64 = numeric(get(0), row, "t_s")?;
        let mut sample = parse_task_stat_line(get(3), t)?;
        sample.pid = numeric(get(1), row, "pid")?;
        sample.tid = numeric(get(2), row, "tid")?;
        samples.push(sample);
    }
    samples.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(samples)
}
