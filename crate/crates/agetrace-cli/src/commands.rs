//! Implementations of the pipeline subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use agetrace::aging::TaskGroupRules;
use agetrace::ingest::{self, EventBatch, IngestStats};
use agetrace::model::{ExperimentPlan, Factor, MetricSeries};
use agetrace::report;
use agetrace::store::{self, VerdictRecord};
use agetrace::synth::{self, CorpusSpec};
use agetrace::trend::{Alpha, TrendError};

use crate::{CliError, Format, RankUnitArg};

/// One experiment's raw capture: a directory with `logcat*`/`*.txt`/`*.log`
/// text files plus optional `pss.csv` and `tasks.csv`, or a bare logcat
/// file. Raw `dumpsys_<t_s>.txt` snapshots are accepted as a best-effort
/// PSS source when no pss.csv exists.
struct ExperimentInput {
    id: String,
    logcats: Vec<PathBuf>,
    pss: Option<PathBuf>,
    tasks: Option<PathBuf>,
    dumpsys: Vec<PathBuf>,
}

fn discover_inputs(inputs: &[PathBuf]) -> Result<Vec<ExperimentInput>, CliError> {
    let mut experiments = Vec::new();
    for input in inputs {
        let id = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::Usage(format!("unnamed input {}", input.display())))?;
        if input.is_file() {
            experiments.push(ExperimentInput {
                id,
                logcats: vec![input.clone()],
                pss: None,
                tasks: None,
                dumpsys: Vec::new(),
            });
            continue;
        }
        if !input.is_dir() {
            return Err(CliError::Data(format!(
                "input {} is neither a file nor a directory",
                input.display()
            )));
        }
        let mut exp = ExperimentInput {
            id,
            logcats: Vec::new(),
            pss: None,
            tasks: None,
            dumpsys: Vec::new(),
        };
        let mut entries: Vec<PathBuf> = fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for path in entries {
            let name = path.file_name().unwrap_or_default().to_string_lossy().to_string();
            if name == "pss.csv" {
                exp.pss = Some(path);
            } else if name == "tasks.csv" {
                exp.tasks = Some(path);
            } else if name.starts_with("dumpsys") {
                exp.dumpsys.push(path);
            } else if name.ends_with(".txt") || name.ends_with(".log") || name.starts_with("logcat")
            {
                exp.logcats.push(path);
            }
        }
        experiments.push(exp);
    }
    experiments.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in experiments.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(CliError::Usage(format!(
                "two inputs share the experiment id {:?}",
                pair[0].id
            )));
        }
    }
    Ok(experiments)
}

struct IngestOutcome {
    id: String,
    series: usize,
    records: usize,
    stats: IngestStats,
    file_errors: Vec<String>,
}

fn ingest_experiment(exp: &ExperimentInput, out_dir: &Path) -> Result<IngestOutcome, CliError> {
    let mut batch = EventBatch::default();
    let mut stats = IngestStats::default();
    let mut file_errors = Vec::new();

    if let Some(path) = &exp.pss {
        match ingest::parse_pss_csv(fs::File::open(path)?) {
            Ok(rows) => batch.pss = rows,
            Err(e) => file_errors.push(format!("{}: {e}", path.display())),
        }
    }
    if let Some(path) = &exp.tasks {
        match ingest::parse_tasks_csv(fs::File::open(path)?) {
            Ok(rows) => batch.tasks = rows,
            Err(e) => file_errors.push(format!("{}: {e}", path.display())),
        }
    }
    // Best-effort raw snapshots, `dumpsys_<t_s>.txt`; capture time from the name.
    for path in &exp.dumpsys {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let t: Option<f64> = stem.rsplit('_').next().and_then(|v| v.parse().ok());
        match t {
            Some(t) => {
                let text = fs::read_to_string(path)?;
                batch.pss.extend(ingest::extract_dumpsys_pss(&text, t));
            }
            None => file_errors.push(format!(
                "{}: cannot read capture time from file name (expected dumpsys_<t_s>)",
                path.display()
            )),
        }
    }
    batch.pss.sort_by(|a, b| {
        a.t.total_cmp(&b.t).then_with(|| a.process.cmp(&b.process))
    });
    let pid_map: BTreeMap<u32, String> = batch
        .pss
        .iter()
        .map(|p| (p.pid, p.process.clone()))
        .collect();
    for path in &exp.logcats {
        match ingest::ingest_logcat(BufReader::new(fs::File::open(path)?), &pid_map) {
            Ok((launches, gcs, file_stats)) => {
                batch.launches.extend(launches);
                batch.gcs.extend(gcs);
                stats.lines += file_stats.lines;
                stats.records += file_stats.records;
                stats.skipped += file_stats.skipped;
                stats.encoding_warnings += file_stats.encoding_warnings;
                stats.malformed.extend(file_stats.malformed);
            }
            Err(e) => file_errors.push(format!("{}: {e}", path.display())),
        }
    }

    let series = ingest::build_series(&batch);
    let records = batch.record_count();
    let out_path = out_dir.join(format!("{}.csv", exp.id));
    let file = fs::File::create(&out_path)?;
    store::write_store(file, &series)?;
    Ok(IngestOutcome {
        id: exp.id.clone(),
        series: series.len(),
        records,
        stats,
        file_errors,
    })
}

pub fn ingest(inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("no inputs given".into()));
    }
    let experiments = discover_inputs(inputs)?;
    fs::create_dir_all(out)?;
    let outcomes: Vec<Result<IngestOutcome, CliError>> = experiments
        .par_iter()
        .map(|exp| ingest_experiment(exp, out))
        .collect();

    let mut total_records = 0;
    for outcome in outcomes {
        let o = outcome?;
        total_records += o.records;
        println!(
            "{}: {} records, {} series ({} lines, {} skipped, {} malformed, {} encoding warnings)",
            o.id,
            o.records,
            o.series,
            o.stats.lines,
            o.stats.skipped,
            o.stats.malformed.len(),
            o.stats.encoding_warnings
        );
        for e in &o.file_errors {
            eprintln!("  error: {e}");
        }
        for m in o.stats.malformed.iter().take(5) {
            eprintln!("  malformed: {m}");
        }
    }
    if total_records == 0 {
        return Err(CliError::Data("no records".into()));
    }
    Ok(())
}

pub fn detect(
    store_dir: &Path,
    out: &Path,
    min_n: usize,
    alpha: Alpha,
    format: Format,
) -> Result<(), CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(store_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "no store files in {}",
            store_dir.display()
        )));
    }

    let loaded: Vec<(String, Vec<MetricSeries>)> = files
        .iter()
        .map(|path| -> Result<_, CliError> {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let series = store::read_store(fs::File::open(path)?)?;
            Ok((id, series))
        })
        .collect::<Result<_, _>>()?;

    let work: Vec<(&str, &MetricSeries)> = loaded
        .iter()
        .flat_map(|(id, series)| series.iter().map(move |s| (id.as_str(), s)))
        .collect();

    let results: Vec<Result<VerdictRecord, (String, TrendError)>> = work
        .par_iter()
        .map(|(exp, series)| {
            if series.len() < min_n {
                return Err((
                    format!("{exp}/{}", series.id()),
                    TrendError::TooShort {
                        need: min_n,
                        got: series.len(),
                    },
                ));
            }
            store::analyze_series(exp, series, alpha)
                .map_err(|e| (format!("{exp}/{}", series.id()), e))
        })
        .collect();

    let mut verdicts = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(v) => verdicts.push(v),
            Err((id, e)) => skipped.push(format!("{id}: {e}")),
        }
    }
    verdicts.sort_by(|a, b| a.series_id.cmp(&b.series_id));

    let file = fs::File::create(out)?;
    match format {
        Format::Json => store::write_verdicts_jsonl(file, &verdicts)?,
        Format::Csv => store::write_verdicts_csv(file, &verdicts)?,
    }
    let declared = verdicts.iter().filter(|v| v.declared).count();
    println!(
        "{} verdicts ({} declared), {} series skipped",
        verdicts.len(),
        declared,
        skipped.len()
    );
    for s in &skipped {
        eprintln!("  skipped: {s}");
    }
    if verdicts.is_empty() {
        return Err(CliError::Data("no series long enough to analyze".into()));
    }
    Ok(())
}

fn load_verdicts(path: &Path) -> Result<Vec<VerdictRecord>, CliError> {
    let verdicts = store::read_verdicts_jsonl(BufReader::new(fs::File::open(path)?))?;
    if verdicts.is_empty() {
        return Err(CliError::Data(format!("no verdicts in {}", path.display())));
    }
    Ok(verdicts)
}

fn write_report(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, body)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
        }
    }
    Ok(())
}

fn csv_to_string<F>(write: F) -> Result<String, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), report::ReportError>,
{
    let mut buf = Vec::new();
    write(&mut buf).map_err(CliError::from)?;
    String::from_utf8(buf).map_err(|e| CliError::Data(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
pub fn compare(
    verdicts_path: &Path,
    plan_path: &Path,
    factor: &str,
    entity: Option<&str>,
    metric: Option<&str>,
    alpha: Alpha,
    format: Format,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let factor: Factor = factor
        .parse()
        .map_err(|e: agetrace::model::ModelError| CliError::Usage(e.to_string()))?;
    let mut verdicts = load_verdicts(verdicts_path)?;
    verdicts.retain(|v| {
        entity.is_none_or(|e| v.entity == e) && metric.is_none_or(|m| v.metric == m)
    });
    if verdicts.is_empty() {
        return Err(CliError::Data("no verdicts match the response filter".into()));
    }
    let plan = ExperimentPlan::from_csv(fs::File::open(plan_path)?)?;
    let (rows, skipped) = report::build_comparisons(&verdicts, &plan, factor, alpha)?;
    if rows.is_empty() {
        return Err(CliError::Data(
            "no response variable covers every experiment of the plan".into(),
        ));
    }
    let body = match format {
        Format::Csv => csv_to_string(|buf| report::write_comparisons_csv(buf, &rows))?,
        Format::Json => format!("{}\n", report::to_canonical_json(&rows)),
    };
    write_report(out, &body)?;
    for s in &skipped {
        eprintln!("skipped (incomplete coverage): {s}");
    }
    Ok(())
}

pub fn correlate(
    verdicts_path: &Path,
    x_metric: &str,
    y_metric: &str,
    y_entity: &str,
    format: Format,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let verdicts = load_verdicts(verdicts_path)?;
    let rows = report::build_correlations(&verdicts, x_metric, y_entity, y_metric)?;
    if rows.is_empty() {
        return Err(CliError::Data(format!(
            "no entity has at least 4 paired ({x_metric}, {y_entity}/{y_metric}) slopes"
        )));
    }
    let body = match format {
        Format::Csv => csv_to_string(|buf| report::write_correlations_csv(buf, &rows))?,
        Format::Json => format!("{}\n", report::to_canonical_json(&rows)),
    };
    write_report(out, &body)
}

pub fn rank(
    verdicts_path: &Path,
    unit: RankUnitArg,
    rules_path: Option<&Path>,
    process_pid: Option<u32>,
    min_gc_samples: usize,
    format: Format,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let verdicts = load_verdicts(verdicts_path)?;
    let rankings = match unit {
        RankUnitArg::Process => report::gc_rankings(&verdicts, min_gc_samples),
        RankUnitArg::Task => {
            let rules = match rules_path {
                Some(path) => TaskGroupRules::from_csv(fs::File::open(path)?)
                    .map_err(|e| CliError::Data(e.to_string()))?,
                None => TaskGroupRules::bundled(),
            };
            report::task_rankings(&verdicts, &rules, process_pid)
        }
    };
    let body = match format {
        Format::Csv => csv_to_string(|buf| report::write_rankings_csv(buf, &rankings))?,
        Format::Json => format!("{}\n", report::to_canonical_json(&rankings)),
    };
    write_report(out, &body)
}

pub fn aging_report(
    baseline: Option<&Path>,
    rejuvenated: Option<&Path>,
    from_projections: Option<&Path>,
    horizon_s: f64,
    threshold_ms: f64,
    format: Format,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let rows = if let Some(table) = from_projections {
        let pairs = report::read_projection_table(
            fs::File::open(table)?,
            horizon_s,
            threshold_ms,
        )?;
        report::build_aging_rows(&pairs)
    } else {
        let baseline = load_verdicts(baseline.expect("clap enforces presence"))?;
        let rejuvenated = load_verdicts(rejuvenated.expect("clap enforces presence"))?;
        report::build_aging_rows_from_verdicts(&baseline, &rejuvenated, horizon_s, threshold_ms)?
    };
    if rows.is_empty() {
        return Err(CliError::Data("no launch-time entities to project".into()));
    }
    let body = match format {
        Format::Csv => csv_to_string(|buf| report::write_aging_csv(buf, &rows))?,
        Format::Json => format!("{}\n", report::to_canonical_json(&rows)),
    };
    write_report(out, &body)
}

pub fn synth(
    spec_path: &Path,
    out: &Path,
    plan_path: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let text = fs::read_to_string(spec_path)?;
    let mut spec = CorpusSpec::from_toml(&text)?;
    if let Some(seed) = seed_override {
        spec.master_seed = seed;
    }
    let plan = match plan_path {
        Some(path) => ExperimentPlan::from_csv(fs::File::open(path)?)?,
        None => spec.resolve_plan()?,
    };
    let manifest = synth::generate_log_corpus(&spec, &plan, out)?;
    println!(
        "{} experiments, {} records -> {}",
        manifest.experiments.len(),
        manifest.total_records,
        out.display()
    );
    Ok(())
}
