//! Synthetic telemetry corpus: emits logcat text, PSS and task CSVs per
//! experiment, every record of which round-trips through the ingest parsers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::{EventBatch, GcCause, GcEvent, LaunchEvent, PssSample, TaskSample};
use crate::model::{ExperimentConfig, ExperimentPlan};
use crate::synth::{derive_seed, SynthError};

const MONTH_DAYS: [u64; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// Pid used for Activity Manager launch log lines.
const LAUNCH_PID: u32 = 1097;

fn default_one() -> f64 {
    1.0
}

fn default_launch_interval() -> f64 {
    60.0
}

fn default_sample_interval() -> f64 {
    30.0
}

fn default_gc_interval() -> f64 {
    120.0
}

fn default_pause_fraction() -> f64 {
    0.05
}

fn default_gc_cause() -> String {
    "Explicit".to_string()
}

fn default_gc_algorithm() -> String {
    "concurrent mark sweep".to_string()
}

/// Launch-time stream shared by all experiments: one sub-stream per activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchStreamSpec {
    pub activities: Vec<String>,
    #[serde(default = "default_launch_interval")]
    pub interval_s: f64,
    pub intercept: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub ar1_phi: f64,
    #[serde(default)]
    pub outlier_rate: f64,
    #[serde(default = "default_one")]
    pub outlier_scale: f64,
}

/// PSS snapshot stream for one process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PssStreamSpec {
    pub process: String,
    pub pid: u32,
    #[serde(default = "default_sample_interval")]
    pub interval_s: f64,
    pub intercept: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub ar1_phi: f64,
    #[serde(default)]
    pub outlier_rate: f64,
    #[serde(default = "default_one")]
    pub outlier_scale: f64,
}

/// GC log stream for one (process, cause).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcStreamSpec {
    pub process: String,
    pub pid: u32,
    #[serde(default = "default_gc_cause")]
    pub cause: String,
    #[serde(default = "default_gc_algorithm")]
    pub algorithm: String,
    #[serde(default = "default_gc_interval")]
    pub interval_s: f64,
    /// Base GC total duration in ms.
    pub intercept: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub ar1_phi: f64,
    /// Pause duration as a fraction of the total duration.
    #[serde(default = "default_pause_fraction")]
    pub pause_fraction: f64,
}

impl GcStreamSpec {
    fn cause(&self) -> GcCause {
        match self.cause.as_str() {
            "Explicit" => GcCause::Explicit,
            "Background" => GcCause::Background,
            "Concurrent" => GcCause::Concurrent,
            other => GcCause::Other(other.to_string()),
        }
    }
}

/// Baseline rate and growth of one cumulative task counter, in units per
/// interval and units per interval per second of elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub base: f64,
    #[serde(default)]
    pub slope: f64,
}

/// Task stat stream for one kernel task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStreamSpec {
    pub pid: u32,
    pub tid: u32,
    pub name: String,
    #[serde(default = "default_sample_interval")]
    pub interval_s: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub minflt: Option<RateSpec>,
    pub majflt: Option<RateSpec>,
    pub utime: Option<RateSpec>,
    pub stime: Option<RateSpec>,
}

/// Full corpus description: the experiment plan plus per-entity streams,
/// reproducible from `master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub master_seed: u64,
    /// Plan manifest path; the bundled 72-experiment plan when absent.
    pub plan_csv: Option<String>,
    pub launch: Option<LaunchStreamSpec>,
    #[serde(default)]
    pub pss: Vec<PssStreamSpec>,
    #[serde(default)]
    pub gc: Vec<GcStreamSpec>,
    #[serde(default)]
    pub task: Vec<TaskStreamSpec>,
}

impl CorpusSpec {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let spec: Self = toml::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("corpus spec serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let check_interval = |name: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(SynthError::Config(format!("{name}: interval_s must be > 0")))
            }
        };
        if let Some(launch) = &self.launch {
            if launch.activities.is_empty() {
                return Err(SynthError::Config("launch: no activities".into()));
            }
            check_interval("launch", launch.interval_s)?;
        }
        for p in &self.pss {
            check_interval(&format!("pss {}", p.process), p.interval_s)?;
        }
        for g in &self.gc {
            check_interval(&format!("gc {}", g.process), g.interval_s)?;
            if !(0.0..=1.0).contains(&g.pause_fraction) {
                return Err(SynthError::Config(format!(
                    "gc {}: pause_fraction must be in [0, 1]",
                    g.process
                )));
            }
            // GC lines are attributed to processes via the pid map built from
            // pss.csv; require the mapping to exist so round-trips are exact.
            if !self
                .pss
                .iter()
                .any(|p| p.pid == g.pid && p.process == g.process)
            {
                return Err(SynthError::Config(format!(
                    "gc {} (pid {}): no matching pss stream to carry the pid mapping",
                    g.process, g.pid
                )));
            }
        }
        for t in &self.task {
            check_interval(&format!("task {}", t.name), t.interval_s)?;
        }
        Ok(())
    }

    /// Loads `plan_csv` if set, the bundled plan otherwise.
    pub fn resolve_plan(&self) -> Result<ExperimentPlan, SynthError> {
        match &self.plan_csv {
            Some(path) => {
                let file = fs::File::open(path)?;
                Ok(ExperimentPlan::from_csv(file)?)
            }
            None => Ok(ExperimentPlan::bundled()),
        }
    }
}

/// AR(1) noise stream started from its stationary distribution.
struct NoiseGen {
    rng: ChaCha8Rng,
    innovations: Normal<f64>,
    phi: f64,
    e: f64,
    started: bool,
}

impl NoiseGen {
    fn new(seed: u64, sigma: f64, phi: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let innovations = Normal::new(0.0, sigma).expect("sigma >= 0");
        let stationary = Normal::new(0.0, sigma / (1.0 - phi * phi).sqrt()).expect("\u{7c}phi\u{7c} < 1");
        let e = stationary.sample(&mut rng);
        Self {
            rng,
            innovations,
            phi,
            e,
            started: false,
        }
    }

    fn next(&mut self) -> f64 {
        if self.started {
            self.e = self.phi * self.e + self.innovations.sample(&mut self.rng);
        }
        self.started = true;
        self.e
    }

    fn uniform(&mut self) -> f64 {
        self.rng.gen()
    }
}

fn snap_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn events_per_experiment(duration_s: u64, interval_s: f64, stream: &str) -> Result<usize, SynthError> {
    let n = (duration_s as f64 / interval_s).floor() as usize;
    if n < 2 {
        return Err(SynthError::Config(format!(
            "{stream}: experiment duration {duration_s}s yields fewer than 2 samples at interval {interval_s}s"
        )));
    }
    Ok(n)
}

/// Generates every event of one experiment, time-ordered (ties keep the
/// spec's stream order). Deterministic in (spec, config).
pub fn generate_experiment_batch(
    spec: &CorpusSpec,
    cfg: &ExperimentConfig,
) -> Result<EventBatch, SynthError> {
    spec.validate()?;
    let mut batch = EventBatch::default();
    let master = spec.master_seed;

    if let Some(launch) = &spec.launch {
        let n = events_per_experiment(cfg.duration_s, launch.interval_s, "launch")?;
        let activities = launch.activities.len() as f64;
        for (k, activity) in launch.activities.iter().enumerate() {
            let seed = derive_seed(master, &[&cfg.id, activity, "launch_time_ms"]);
            let mut noise = NoiseGen::new(seed, launch.noise_sigma, launch.ar1_phi);
            let offset = launch.interval_s * k as f64 / activities;
            for j in 1..=n {
                let t = snap_ms(launch.interval_s * j as f64 + offset);
                let mut value = launch.intercept + launch.slope * t + noise.next();
                if launch.outlier_rate > 0.0 && noise.uniform() < launch.outlier_rate {
                    value *= launch.outlier_scale;
                }
                batch.launches.push(LaunchEvent {
                    t,
                    activity: activity.clone(),
                    launch_time_ms: value.round().max(0.0),
                });
            }
        }
    }

    for stream in &spec.pss {
        let n = events_per_experiment(cfg.duration_s, stream.interval_s, "pss")?;
        let seed = derive_seed(master, &[&cfg.id, &stream.process, "pss_kb"]);
        let mut noise = NoiseGen::new(seed, stream.noise_sigma, stream.ar1_phi);
        for j in 1..=n {
            let t = snap_ms(stream.interval_s * j as f64);
            let mut value = stream.intercept + stream.slope * t + noise.next();
            if stream.outlier_rate > 0.0 && noise.uniform() < stream.outlier_rate {
                value *= stream.outlier_scale;
            }
            batch.pss.push(PssSample {
                t,
                process: stream.process.clone(),
                pid: stream.pid,
                pss_kb: value.round().max(0.0),
            });
        }
    }

    for stream in &spec.gc {
        let n = events_per_experiment(cfg.duration_s, stream.interval_s, "gc")?;
        let cause = stream.cause();
        let metric = crate::ingest::gc_metric("duration", &cause);
        let seed = derive_seed(master, &[&cfg.id, &stream.process, &metric]);
        let mut noise = NoiseGen::new(seed, stream.noise_sigma, stream.ar1_phi);
        let mut cosmetic = ChaCha8Rng::seed_from_u64(derive_seed(
            master,
            &[&cfg.id, &stream.process, &metric, "fields"],
        ));
        for j in 1..=n {
            let t = snap_ms(stream.interval_s * j as f64);
            let raw = stream.intercept + stream.slope * t + noise.next();
            let total_ms = round3(raw).max(0.001);
            let pause_ms = round3(total_ms * stream.pause_fraction).max(0.0);
            batch.gcs.push(GcEvent {
                t,
                process: stream.process.clone(),
                cause: cause.clone(),
                algorithm: stream.algorithm.clone(),
                freed_objects: cosmetic.gen_range(1_000..200_000),
                freed_bytes: cosmetic.gen_range(1..64) * 1024 * 1024,
                los_objects: cosmetic.gen_range(0..100),
                los_bytes: cosmetic.gen_range(0..512) * 1024,
                pause_ms: vec![pause_ms],
                total_ms,
            });
        }
    }

    for stream in &spec.task {
        let n = events_per_experiment(cfg.duration_s, stream.interval_s, "task")?;
        let entity = crate::ingest::task_entity(stream.pid, stream.tid, &stream.name);
        let counters = [
            ("minflt", stream.minflt),
            ("majflt", stream.majflt),
            ("utime", stream.utime),
            ("stime", stream.stime),
        ];
        let mut totals = [0u64; 4];
        let mut gens: Vec<NoiseGen> = counters
            .iter()
            .map(|(metric, _)| {
                NoiseGen::new(
                    derive_seed(master, &[&cfg.id, &entity, metric]),
                    stream.noise_sigma,
                    0.0,
                )
            })
            .collect();
        for j in 1..=n {
            let t = snap_ms(stream.interval_s * j as f64);
            for (idx, (_, rate)) in counters.iter().enumerate() {
                let increment = match rate {
                    Some(r) => (r.base + r.slope * t + gens[idx].next()).round().max(0.0) as u64,
                    None => 0,
                };
                totals[idx] += increment;
            }
            batch.tasks.push(TaskSample {
                t,
                pid: stream.pid,
                tid: stream.tid,
                task_name: stream.name.clone(),
                minflt: totals[0],
                majflt: totals[1],
                utime_ticks: totals[2],
                stime_ticks: totals[3],
            });
        }
    }

    batch
        .launches
        .sort_by(|a, b| a.t.total_cmp(&b.t).then_with(|| a.activity.cmp(&b.activity)));
    batch.pss.sort_by(|a, b| {
        a.t.total_cmp(&b.t)
            .then_with(|| a.process.cmp(&b.process))
            .then_with(|| a.pid.cmp(&b.pid))
    });
    batch
        .gcs
        .sort_by(|a, b| a.t.total_cmp(&b.t).then_with(|| a.process.cmp(&b.process)));
    batch
        .tasks
        .sort_by(|a, b| a.t.total_cmp(&b.t).then_with(|| a.tid.cmp(&b.tid)));

    Ok(batch)
}

/// `MM-DD HH:MM:SS.mmm` timestamp for a seconds offset from Jan 1 00:00.
pub fn format_threadtime(t: f64) -> String {
    let total_ms = (t * 1000.0).round() as u64;
    let ms = total_ms % 1000;
    let total_s = total_ms / 1000;
    let mut day = (total_s / 86_400) % 365;
    let rem = total_s % 86_400;
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    let mut month = 0usize;
    while day >= MONTH_DAYS[month] {
        day -= MONTH_DAYS[month];
        month += 1;
    }
    format!("{:02}-{:02} {:02}:{:02}:{:02}.{:03}", month + 1, day + 1, h, m, s, ms)
}

fn format_bytes(bytes: u64) -> String {
    const KB: u64 = 1024;
    const MB: u64 = 1024 * 1024;
    const GB: u64 = 1024 * 1024 * 1024;
    if bytes > 0 && bytes.is_multiple_of(GB) {
        format!("{}GB", bytes / GB)
    } else if bytes > 0 && bytes.is_multiple_of(MB) {
        format!("{}MB", bytes / MB)
    } else if bytes > 0 && bytes.is_multiple_of(KB) {
        format!("{}KB", bytes / KB)
    } else {
        format!("{bytes}B")
    }
}

fn format_launch_duration(ms: u64) -> String {
    if ms >= 60_000 {
        format!("{}m{}s{}ms", ms / 60_000, (ms % 60_000) / 1000, ms % 1000)
    } else if ms >= 1000 {
        format!("{}s{}ms", ms / 1000, ms % 1000)
    } else {
        format!("{ms}ms")
    }
}

/// A threadtime Activity Manager line for a launch event.
pub fn format_displayed_line(event: &LaunchEvent) -> String {
    format!(
        "{} {:5} {:5} I ActivityManager: Displayed {}: +{}",
        format_threadtime(event.t),
        LAUNCH_PID,
        LAUNCH_PID,
        event.activity,
        format_launch_duration(event.launch_time_ms.round().max(0.0) as u64),
    )
}

/// A threadtime ART line for a GC event. The heap-occupancy section is
/// derived from the freed counts (it is not part of the parsed fields).
pub fn format_gc_line(event: &GcEvent, pid: u32) -> String {
    let pauses: Vec<String> = event.pause_ms.iter().map(|p| format!("{p:.3}ms")).collect();
    let pct = 10 + event.freed_objects % 80;
    let heap_used = (event.freed_bytes / (1024 * 1024) + 20) * 1024 * 1024;
    let heap_total = heap_used + 13 * 1024 * 1024;
    format!(
        "{} {:5} {:5} I art: {} {} GC freed {}({}) AllocSpace objects, {}({}) LOS objects, \
         {}% free, {}/{}, paused {} total {:.3}ms",
        format_threadtime(event.t),
        pid,
        pid,
        event.cause.word(),
        event.algorithm,
        event.freed_objects,
        format_bytes(event.freed_bytes),
        event.los_objects,
        format_bytes(event.los_bytes),
        pct,
        format_bytes(heap_used),
        format_bytes(heap_total),
        pauses.join(","),
        event.total_ms,
    )
}

/// Files written for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFiles {
    pub id: String,
    pub dir: PathBuf,
    pub logcat: PathBuf,
    pub pss: PathBuf,
    pub tasks: PathBuf,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub out_dir: PathBuf,
    pub experiments: Vec<ExperimentFiles>,
    pub total_records: usize,
}

/// Writes `<exp_id>/logcat.txt`, `<exp_id>/pss.csv`, `<exp_id>/tasks.csv`.
pub fn write_experiment(
    spec: &CorpusSpec,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentFiles, SynthError> {
    let batch = generate_experiment_batch(spec, cfg)?;
    let dir = out_dir.join(&cfg.id);
    fs::create_dir_all(&dir)?;

    let pid_of_gc_process = |process: &str| {
        spec.gc
            .iter()
            .find(|g| g.process == process)
            .map(|g| g.pid)
            .unwrap_or(0)
    };

    // logcat: launch and GC lines interleaved in time order.
    let mut lines: Vec<(f64, String)> = Vec::new();
    for event in &batch.launches {
        lines.push((event.t, format_displayed_line(event)));
    }
    for event in &batch.gcs {
        lines.push((event.t, format_gc_line(event, pid_of_gc_process(&event.process))));
    }
    lines.sort_by(|a, b| a.0.total_cmp(&b.0));
    let logcat = dir.join("logcat.txt");
    {
        let mut f = fs::File::create(&logcat)?;
        for (_, line) in &lines {
            writeln!(f, "{line}")?;
        }
    }

    // pss.csv, rows in the batch's time order.
    let pss = dir.join("pss.csv");
    {
        let mut w = csv::Writer::from_path(&pss).map_err(io_from_csv)?;
        w.write_record(["t_s", "process", "pid", "pss_kb"]).map_err(io_from_csv)?;
        for r in &batch.pss {
            w.write_record([
                r.t.to_string(),
                r.process.clone(),
                r.pid.to_string(),
                r.pss_kb.to_string(),
            ])
            .map_err(io_from_csv)?;
        }
        w.flush()?;
    }

    // tasks.csv, rows in the batch's time order.
    let tasks = dir.join("tasks.csv");
    {
        let mut w = csv::Writer::from_path(&tasks).map_err(io_from_csv)?;
        w.write_record(["t_s", "pid", "tid", "stat_line"]).map_err(io_from_csv)?;
        for r in &batch.tasks {
            let stat_line = format!(
                "{} ({}) S {} 0 0 0 0 0 {} 0 {} 0 {} {} 0 0 20 0 1 0 0",
                r.tid, r.task_name, r.pid, r.minflt, r.majflt, r.utime_ticks, r.stime_ticks
            );
            w.write_record([r.t.to_string(), r.pid.to_string(), r.tid.to_string(), stat_line])
                .map_err(io_from_csv)?;
        }
        w.flush()?;
    }

    Ok(ExperimentFiles {
        id: cfg.id.clone(),
        dir,
        logcat,
        pss,
        tasks,
        records: batch.record_count(),
    })
}

fn io_from_csv(e: csv::Error) -> SynthError {
    SynthError::Config(e.to_string())
}

/// Generates the whole corpus for a plan and writes a `manifest.json`.
pub fn generate_log_corpus(
    spec: &CorpusSpec,
    plan: &ExperimentPlan,
    out_dir: &Path,
) -> Result<CorpusManifest, SynthError> {
    spec.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut experiments = Vec::new();
    for cfg in plan.experiments() {
        experiments.push(write_experiment(spec, cfg, out_dir)?);
    }
    let manifest = CorpusManifest {
        out_dir: out_dir.to_path_buf(),
        total_records: experiments.iter().map(|e| e.records).sum(),
        experiments,
    };
    let json = serde_json::to_value(&manifest).expect("manifest serializes");
    fs::write(out_dir.join("manifest.json"), format!("{json}\n"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest;
    use std::collections::BTreeMap;

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            master_seed: 42,
            plan_csv: None,
            launch: Some(LaunchStreamSpec {
                activities: vec!["com.a/.Main".into(), "com.b/.Main".into()],
                interval_s: 60.0,
                intercept: 300.0,
                slope: 0.01,
                noise_sigma: 20.0,
                ar1_phi: 0.0,
                outlier_rate: 0.0,
                outlier_scale: 1.0,
            }),
            pss: vec![PssStreamSpec {
                process: "system".into(),
                pid: 1200,
                interval_s: 30.0,
                intercept: 150_000.0,
                slope: 1.5,
                noise_sigma: 300.0,
                ar1_phi: 0.0,
                outlier_rate: 0.0,
                outlier_scale: 1.0,
            }],
            gc: vec![GcStreamSpec {
                process: "system".into(),
                pid: 1200,
                cause: "Explicit".into(),
                algorithm: "concurrent mark sweep".into(),
                interval_s: 120.0,
                intercept: 60.0,
                slope: 0.002,
                noise_sigma: 3.0,
                ar1_phi: 0.0,
                pause_fraction: 0.05,
            }],
            task: vec![TaskStreamSpec {
                pid: 1200,
                tid: 1221,
                name: "ActivityManager".into(),
                interval_s: 30.0,
                noise_sigma: 1.0,
                minflt: Some(RateSpec { base: 20.0, slope: 0.0 }),
                majflt: Some(RateSpec { base: 2.0, slope: 0.0 }),
                utime: Some(RateSpec { base: 40.0, slope: 0.002 }),
                stime: Some(RateSpec { base: 10.0, slope: 0.0 }),
            }],
        }
    }

    fn one_hour_cfg() -> ExperimentConfig {
        ExperimentConfig {
            id: "EXPT".into(),
            dev: "D".into(),
            ver: "V".into(),
            app: "A".into(),
            events: "W".into(),
            sto: "S".into(),
            duration_s: 3600,
        }
    }

    #[test]
    fn batch_is_deterministic() {
        let spec = small_spec();
        let cfg = one_hour_cfg();
        let a = generate_experiment_batch(&spec, &cfg).unwrap();
        let b = generate_experiment_batch(&spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.launches.len(), 2 * 60);
        assert_eq!(a.pss.len(), 120);
        assert_eq!(a.gcs.len(), 30);
        assert_eq!(a.tasks.len(), 120);
    }

    #[test]
    fn corpus_files_are_byte_identical_across_runs() {
        let spec = small_spec();
        let plan = ExperimentPlan::new(vec![one_hour_cfg()]).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_log_corpus(&spec, &plan, dir_a.path()).unwrap();
        generate_log_corpus(&spec, &plan, dir_b.path()).unwrap();
        for name in ["logcat.txt", "pss.csv", "tasks.csv"] {
            let a = fs::read(dir_a.path().join("EXPT").join(name)).unwrap();
            let b = fs::read(dir_b.path().join("EXPT").join(name)).unwrap();
            assert_eq!(a, b, "{name} differs across runs");
        }
    }

    #[test]
    fn emitted_records_round_trip_field_exact() {
        let spec = small_spec();
        let cfg = one_hour_cfg();
        let dir = tempfile::tempdir().unwrap();
        write_experiment(&spec, &cfg, dir.path()).unwrap();
        let batch = generate_experiment_batch(&spec, &cfg).unwrap();

        let pss = ingest::parse_pss_csv(
            fs::File::open(dir.path().join("EXPT/pss.csv")).unwrap(),
        )
        .unwrap();
        assert_eq!(pss, batch.pss);

        let tasks = ingest::parse_tasks_csv(
            fs::File::open(dir.path().join("EXPT/tasks.csv")).unwrap(),
        )
        .unwrap();
        assert_eq!(tasks, batch.tasks);

        let mut pid_map = BTreeMap::new();
        for p in &pss {
            pid_map.insert(p.pid, p.process.clone());
        }
        let file = std::io::BufReader::new(
            fs::File::open(dir.path().join("EXPT/logcat.txt")).unwrap(),
        );
        let (launches, gcs, stats) = ingest::ingest_logcat(file, &pid_map).unwrap();
        assert!(stats.malformed.is_empty());
        assert_eq!(launches, batch.launches);
        assert_eq!(gcs, batch.gcs);
    }

    #[test]
    fn zero_experiments_empty_manifest() {
        let spec = small_spec();
        let plan = ExperimentPlan::new(vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_log_corpus(&spec, &plan, dir.path()).unwrap();
        assert!(manifest.experiments.is_empty());
        assert_eq!(manifest.total_records, 0);
    }

    #[test]
    fn gc_without_pss_mapping_rejected() {
        let mut spec = small_spec();
        spec.pss.clear();
        assert!(matches!(spec.validate(), Err(SynthError::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let spec = small_spec();
        let text = spec.to_toml();
        let back = CorpusSpec::from_toml(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn threadtime_formatting() {
        assert_eq!(format_threadtime(0.0), "01-01 00:00:00.000");
        assert_eq!(format_threadtime(630.5), "01-01 00:10:30.500");
        assert_eq!(format_threadtime(86_400.0 + 3723.456), "01-02 01:02:03.456");
    }

    #[test]
    fn duration_formatting_covers_grammar() {
        assert_eq!(format_launch_duration(100), "100ms");
        assert_eq!(format_launch_duration(1450), "1s450ms");
        assert_eq!(format_launch_duration(90_250), "1m30s250ms");
    }
}
