//! Parsers for Activity Manager "Displayed" lines and ART garbage-collection
//! lines as captured by logcat, in threadtime, brief, or bare-tag form.

use std::sync::LazyLock;

use regex::Regex;

use crate::ingest::{GcCause, GcEvent, IngestError, LaunchEvent};

/// Prefix-stripped view of a logcat line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogcatLine<'a> {
    /// Seconds derived from a `MM-DD HH:MM:SS.mmm` threadtime prefix.
    pub t: Option<f64>,
    pub pid: Option<u32>,
    pub tag: Option<&'a str>,
    pub message: &'a str,
}

static THREADTIME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(\d{2})-(\d{2})\s+(\d{2}):(\d{2}):(\d{2})\.(\d{3})\s+(\d+)\s+(\d+)\s+([VDIWEF])\s+(.+?)\s*:\s(.*)$",
    )
    .unwrap()
});

static BRIEF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([VDIWEF])/([^(:]+)\(\s*(\d+)\):\s?(.*)$").unwrap());

static BARE_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([VDIWEF])/([^(:]+):\s?(.*)$").unwrap());

const MONTH_DAYS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

fn threadtime_seconds(month: u32, day: u32, h: u32, m: u32, s: u32, ms: u32) -> Option<f64> {
    if !(1..=12).contains(&month) || day == 0 || day > MONTH_DAYS[(month - 1) as usize] {
        return None;
    }
    let day_of_year: u32 =
        MONTH_DAYS[..(month - 1) as usize].iter().sum::<u32>() + (day - 1);
    Some(
        day_of_year as f64 * 86_400.0
            + h as f64 * 3600.0
            + m as f64 * 60.0
            + s as f64
            + ms as f64 / 1000.0,
    )
}

/// Splits off a recognized logcat prefix; lines without one come back whole.
pub fn split_logcat_line(line: &str) -> LogcatLine<'_> {
    if let Some(c) = THREADTIME.captures(line) {
        let num = |i: usize| c.get(i).unwrap().as_str().parse::<u32>().unwrap();
        return LogcatLine {
            t: threadtime_seconds(num(1), num(2), num(3), num(4), num(5), num(6)),
            pid: Some(num(7)),
            tag: Some(c.get(10).unwrap().as_str()),
            message: c.get(11).unwrap().as_str(),
        };
    }
    if let Some(c) = BRIEF.captures(line) {
        return LogcatLine {
            t: None,
            pid: c.get(3).unwrap().as_str().parse().ok(),
            tag: Some(c.get(2).unwrap().as_str().trim()),
            message: c.get(4).unwrap().as_str(),
        };
    }
    if let Some(c) = BARE_TAG.captures(line) {
        return LogcatLine {
            t: None,
            pid: None,
            tag: Some(c.get(2).unwrap().as_str().trim()),
            message: c.get(3).unwrap().as_str(),
        };
    }
    LogcatLine {
        t: None,
        pid: None,
        tag: None,
        message: line,
    }
}

/// Parses `Nms`, `NsMms`, `NmMsKms` (and hour-prefixed) duration tokens into
/// milliseconds.
pub fn parse_duration_ms(token: &str) -> Option<f64> {
    let bytes = token.as_bytes();
    let mut i = 0;
    let mut total: u64 = 0;
    let mut parsed_any = false;
    while i < bytes.len() {
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return None;
        }
        let value: u64 = token[start..i].parse().ok()?;
        let rest = &token[i..];
        let (factor, skip) = if rest.starts_with("ms") {
            (1, 2)
        } else if rest.starts_with('s') {
            (1_000, 1)
        } else if rest.starts_with('m') {
            (60_000, 1)
        } else if rest.starts_with('h') {
            (3_600_000, 1)
        } else {
            return None;
        };
        total = value.checked_mul(factor).and_then(|v| total.checked_add(v))?;
        i += skip;
        parsed_any = true;
    }
    parsed_any.then_some(total as f64)
}

static DISPLAYED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Displayed\s+(\S+?):\s*\+(\S+)").unwrap());

/// Extracts a launch event from an Activity Manager "Displayed" line.
///
/// `fallback_t` is used when the line carries no threadtime prefix. Lines
/// that are not Displayed lines yield `Ok(None)`; a Displayed line whose
/// duration cannot be parsed is an error.
pub fn parse_displayed_line(line: &str, fallback_t: f64) -> Result<Option<LaunchEvent>, IngestError> {
    let split = split_logcat_line(line);
    let Some(c) = DISPLAYED.captures(split.message) else {
        return Ok(None);
    };
    let activity = c.get(1).unwrap().as_str();
    let duration = c.get(2).unwrap().as_str();
    let launch_time_ms = parse_duration_ms(duration).ok_or_else(|| IngestError::MalformedDuration {
        line: line.to_string(),
    })?;
    Ok(Some(LaunchEvent {
        t: split.t.unwrap_or(fallback_t),
        activity: activity.to_string(),
        launch_time_ms,
    }))
}

static GC_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)^
        (\S+)\s+(.+?)\s+GC\ freed\s+
        (\d+)\((\S+?)\)\s+AllocSpace\ objects,\s+
        (\d+)\((\S+?)\)\s+LOS\ objects,\s+
        \d+%\ free,\s*
        (?:\S+/\S+,\s*)?
        paused\s+(\S+)\s+total\s+(\S+)
        \s*$",
    )
    .unwrap()
});

fn parse_bytes(token: &str) -> Option<u64> {
    let split = token.find(|c: char| !c.is_ascii_digit() && c != '.')?;
    let value: f64 = token[..split].parse().ok()?;
    let factor = match &token[split..] {
        "B" => 1.0,
        "KB" => 1024.0,
        "MB" => 1024.0 * 1024.0,
        "GB" => 1024.0 * 1024.0 * 1024.0,
        _ => return None,
    };
    Some((value * factor).round() as u64)
}

fn parse_time_ms(token: &str) -> Option<f64> {
    if let Some(v) = token.strip_suffix("ms") {
        v.parse::<f64>().ok()
    } else if let Some(v) = token.strip_suffix("us") {
        v.parse::<f64>().ok().map(|x| x / 1000.0)
    } else if let Some(v) = token.strip_suffix('s') {
        v.parse::<f64>().ok().map(|x| x * 1000.0)
    } else {
        None
    }
}

/// Extracts a garbage-collection event from an ART log line.
///
/// The line must carry the `art` tag (or no tag at all, when fed a bare
/// message). Non-GC lines yield `Ok(None)`; an art GC line with missing or
/// malformed numeric fields is an error.
pub fn parse_gc_line(
    line: &str,
    fallback_t: f64,
    process: &str,
) -> Result<Option<GcEvent>, IngestError> {
    let split = split_logcat_line(line);
    if let Some(tag) = split.tag {
        if tag != "art" {
            return Ok(None);
        }
    }
    if !split.message.contains("GC freed") {
        return Ok(None);
    }
    let malformed = || IngestError::MalformedGcLine {
        line: line.to_string(),
    };
    let c = GC_LINE.captures(split.message).ok_or_else(malformed)?;
    let get = |i: usize| c.get(i).unwrap().as_str();

    let cause = match get(1) {
        "Explicit" => GcCause::Explicit,
        "Background" => GcCause::Background,
        "Concurrent" => GcCause::Concurrent,
        other => GcCause::Other(other.to_string()),
    };
    let freed_objects: u64 = get(3).parse().map_err(|_| malformed())?;
    let freed_bytes = parse_bytes(get(4)).ok_or_else(malformed)?;
    let los_objects: u64 = get(5).parse().map_err(|_| malformed())?;
    let los_bytes = parse_bytes(get(6)).ok_or_else(malformed)?;
    let pause_ms: Vec<f64> = get(7)
        .split(',')
        .map(parse_time_ms)
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(malformed)?;
    let total_ms = parse_time_ms(get(8)).ok_or_else(malformed)?;

    Ok(Some(GcEvent {
        t: split.t.unwrap_or(fallback_t),
        process: process.to_string(),
        cause,
        algorithm: get(2).to_string(),
        freed_objects,
        freed_bytes,
        los_objects,
        los_bytes,
        pause_ms,
        total_ms,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn displayed_brief_format() {
        let line = "I/ActivityManager(1097): Displayed com.example.myapp/.MainActivity: +100ms";
        let event = parse_displayed_line(line, 42.0).unwrap().unwrap();
        assert_eq!(event.activity, "com.example.myapp/.MainActivity");
        assert_eq!(event.launch_time_ms, 100.0);
        assert_eq!(event.t, 42.0);
    }

    #[test]
    fn displayed_seconds_and_millis() {
        let line = "I/ActivityManager(1097): Displayed com.a/.B: +1s450ms";
        let event = parse_displayed_line(line, 0.0).unwrap().unwrap();
        assert_eq!(event.launch_time_ms, 1450.0);
    }

    #[test]
    fn displayed_minutes_seconds_millis() {
        assert_eq!(parse_duration_ms("1m30s250ms"), Some(90_250.0));
        assert_eq!(parse_duration_ms("747ms"), Some(747.0));
        assert_eq!(parse_duration_ms("bogus"), None);
    }

    #[test]
    fn unrelated_line_is_none() {
        assert!(parse_displayed_line("I/art: some unrelated line", 0.0)
            .unwrap()
            .is_none());
        assert!(parse_gc_line("I/ActivityManager(1): Displayed a: +1ms", 0.0, "p")
            .unwrap()
            .is_none());
    }

    #[test]
    fn displayed_malformed_duration_is_error() {
        let line = "I/ActivityManager(1097): Displayed com.a/.B: +12xy";
        assert!(matches!(
            parse_displayed_line(line, 0.0),
            Err(IngestError::MalformedDuration { .. })
        ));
    }

    #[test]
    fn displayed_threadtime_prefix_supplies_time() {
        let line = "01-01 00:10:30.500  1097  1134 I ActivityManager: Displayed com.a/.B: +88ms";
        let event = parse_displayed_line(line, 7.0).unwrap().unwrap();
        assert_eq!(event.t, 630.5);
        assert_eq!(event.launch_time_ms, 88.0);
    }

    #[test]
    fn gc_line_with_heap_section() {
        let line = "I/art: Explicit concurrent mark sweep GC freed 104710(7MB) AllocSpace objects, \
                    21(416KB) LOS objects, 33% free, 25MB/38MB, paused 1.230ms total 67.216ms";
        let gc = parse_gc_line(line, 5.0, "system").unwrap().unwrap();
        assert_eq!(gc.cause, GcCause::Explicit);
        assert_eq!(gc.algorithm, "concurrent mark sweep");
        assert_eq!(gc.freed_objects, 104_710);
        assert_eq!(gc.freed_bytes, 7 * 1024 * 1024);
        assert_eq!(gc.los_objects, 21);
        assert_eq!(gc.los_bytes, 416 * 1024);
        assert_eq!(gc.pause_ms, vec![1.230]);
        assert_eq!(gc.total_ms, 67.216);
        assert_eq!(gc.process, "system");
    }

    #[test]
    fn gc_without_heap_section() {
        let line = "I/art: Background partial concurrent mark sweep GC freed 10(1KB) AllocSpace \
                    objects, 0(0B) LOS objects, 40% free, paused 2.000ms total 150.000ms";
        let gc = parse_gc_line(line, 0.0, "p").unwrap().unwrap();
        assert_eq!(gc.cause, GcCause::Background);
        assert_eq!(gc.algorithm, "partial concurrent mark sweep");
        assert_eq!(gc.total_ms, 150.0);
    }

    #[test]
    fn gc_multiple_pauses_stored() {
        let line = "I/art: Explicit mark sweep GC freed 1(1B) AllocSpace objects, 0(0B) LOS \
                    objects, 10% free, paused 1.500ms,2.500ms total 30.000ms";
        let gc = parse_gc_line(line, 0.0, "p").unwrap().unwrap();
        assert_eq!(gc.pause_ms, vec![1.5, 2.5]);
        assert_eq!(gc.pause_total_ms(), 4.0);
    }

    #[test]
    fn gc_missing_fields_is_error() {
        let line = "I/art: Explicit concurrent mark sweep GC freed 104710(7MB) AllocSpace objects";
        assert!(matches!(
            parse_gc_line(line, 0.0, "p"),
            Err(IngestError::MalformedGcLine { .. })
        ));
    }

    #[test]
    fn non_art_tag_is_not_gc() {
        let line = "I/dalvikvm: Explicit concurrent mark sweep GC freed 1(1B) AllocSpace objects, \
                    0(0B) LOS objects, 10% free, paused 1.0ms total 2.0ms";
        assert!(parse_gc_line(line, 0.0, "p").unwrap().is_none());
    }

    #[test]
    fn threadtime_split() {
        let line = "03-02 01:02:03.456  1097    42 I art: message body";
        let split = split_logcat_line(line);
        assert_eq!(split.pid, Some(1097));
        assert_eq!(split.tag, Some("art"));
        assert_eq!(split.message, "message body");
        let expected = (31 + 28 + 1) as f64 * 86_400.0 + 3723.456;
        assert_eq!(split.t, Some(expected));
    }
}
