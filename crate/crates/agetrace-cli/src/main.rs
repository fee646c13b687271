//! `agetrace`: file-mediated pipeline for software aging analysis.
//!
//! Stages: `synth` (synthetic corpora) and `ingest` produce a normalized
//! series store; `detect` runs the trend battery; `compare`, `correlate`,
//! `rank`, and `aging-report` turn verdicts into reports.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes: 0 success, 1 usage error, 2 empty or invalid data,
/// 3 statistical precondition failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Stats(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Stats(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Stats(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<agetrace::store::StoreError> for CliError {
    fn from(e: agetrace::store::StoreError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<agetrace::model::ModelError> for CliError {
    fn from(e: agetrace::model::ModelError) -> Self {
        use agetrace::model::ModelError;
        match e {
            ModelError::SingleLevel { .. }
            | ModelError::UnpairedConfig { .. }
            | ModelError::TooShort { .. } => CliError::Stats(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<agetrace::synth::SynthError> for CliError {
    fn from(e: agetrace::synth::SynthError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<agetrace::report::ReportError> for CliError {
    fn from(e: agetrace::report::ReportError) -> Self {
        use agetrace::report::ReportError;
        match e {
            ReportError::Model(m) => m.into(),
            ReportError::Group(g) => CliError::Stats(g.to_string()),
            ReportError::Aging(a) => CliError::Stats(a.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<agetrace::aging::AgingError> for CliError {
    fn from(e: agetrace::aging::AgingError) -> Self {
        CliError::Stats(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Significance level for every hypothesis test.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub alpha: f64,

    /// Degradation projection horizon in seconds.
    #[arg(long, global = true, default_value_t = 21600.0)]
    pub horizon_s: f64,

    /// Launch-time threshold in milliseconds for time-to-aging-failure.
    #[arg(long, global = true, default_value_t = 200.0)]
    pub threshold_ms: f64,

    /// Minimum sample count for a GC series to enter the rankings.
    #[arg(long, global = true, default_value_t = 100)]
    pub min_gc_samples: usize,

    /// Output format: reports default to csv; detect defaults to JSON lines
    /// unless its output path ends in .csv.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Worker threads for per-experiment work (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Master seed override for synthetic generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Parser)]
#[command(
    name = "agetrace",
    version,
    about = "Software aging detection and quantification from device telemetry"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw telemetry (logcat, pss.csv, tasks.csv) into a series store.
    Ingest {
        /// Experiment directories (or single logcat files).
        inputs: Vec<PathBuf>,
        /// Store directory; one CSV per experiment.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the trend battery over every series of a store.
    Detect {
        /// Store directory written by `ingest`.
        #[arg(long)]
        store: PathBuf,
        /// Verdicts file (JSON lines or CSV per --format).
        #[arg(long)]
        out: PathBuf,
        /// Series shorter than this are skipped and listed.
        #[arg(long, default_value_t = 10)]
        min_n: usize,
    },
    /// Compare slope distributions across the levels of one factor.
    Compare {
        #[arg(long)]
        verdicts: PathBuf,
        /// Plan manifest (id,dev,ver,app,events,sto,duration_s).
        #[arg(long)]
        plan: PathBuf,
        /// DEV, VER, APP, EVENTS, or STO.
        #[arg(long)]
        factor: String,
        /// Restrict responses to one entity (e.g. all_activities, system).
        #[arg(long)]
        entity: Option<String>,
        /// Restrict responses to one metric (e.g. launch_time_ms, pss_kb).
        #[arg(long)]
        metric: Option<String>,
        /// Report path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlate per-entity slopes of one metric against a response metric.
    Correlate {
        #[arg(long)]
        verdicts: PathBuf,
        /// Metric whose per-entity slope vectors are correlated (e.g. pss_kb).
        #[arg(long)]
        x: String,
        /// Response metric (e.g. launch_time_ms).
        #[arg(long)]
        y: String,
        /// Entity carrying the response metric.
        #[arg(long, default_value = "all_activities")]
        y_entity: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank processes (GC metrics) or task groups by trend occurrences.
    Rank {
        #[arg(long)]
        verdicts: PathBuf,
        /// process | task
        #[arg(long)]
        unit: RankUnitArg,
        /// Task-group rules manifest (bundled rules when omitted).
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Restrict task rankings to one process id.
        #[arg(long)]
        process_pid: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degradation projections and rejuvenation gains.
    AgingReport {
        /// Baseline verdicts (JSON lines).
        #[arg(long, required_unless_present = "from_projections")]
        baseline: Option<PathBuf>,
        /// Rejuvenated verdicts (JSON lines).
        #[arg(long, required_unless_present = "from_projections")]
        rejuvenated: Option<PathBuf>,
        /// Projection table `activity,lt_increase_ms,ttaf_h,lt_increase_r_ms,ttaf_r_h`
        /// instead of verdict files.
        #[arg(long, conflicts_with_all = ["baseline", "rejuvenated"])]
        from_projections: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic telemetry corpus with known ground truth.
    Synth {
        /// Corpus spec (TOML).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; one subdirectory per experiment.
        #[arg(long)]
        out: PathBuf,
        /// Plan manifest override (bundled 72-experiment plan by default).
        #[arg(long)]
        plan: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let global = cli.global;
    if global.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(global.jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let alpha = agetrace::trend::Alpha::new(global.alpha)
        .ok_or_else(|| CliError::Usage(format!("alpha must be in (0, 1), got {}", global.alpha)))?;

    match cli.command {
        Command::Ingest { inputs, out } => commands::ingest(&inputs, &out),
        Command::Detect { store, out, min_n } => {
            let format = global.format.unwrap_or_else(|| {
                if out.extension().is_some_and(|x| x == "csv") {
                    Format::Csv
                } else {
                    Format::Json
                }
            });
            commands::detect(&store, &out, min_n, alpha, format)
        }
        Command::Compare {
            verdicts,
            plan,
            factor,
            entity,
            metric,
            out,
        } => commands::compare(
            &verdicts,
            &plan,
            &factor,
            entity.as_deref(),
            metric.as_deref(),
            alpha,
            global.format.unwrap_or(Format::Csv),
            out.as_deref(),
        ),
        Command::Correlate {
            verdicts,
            x,
            y,
            y_entity,
            out,
        } => commands::correlate(
            &verdicts,
            &x,
            &y,
            &y_entity,
            global.format.unwrap_or(Format::Csv),
            out.as_deref(),
        ),
        Command::Rank {
            verdicts,
            unit,
            rules,
            process_pid,
            out,
        } => commands::rank(
            &verdicts,
            unit,
            rules.as_deref(),
            process_pid,
            global.min_gc_samples,
            global.format.unwrap_or(Format::Csv),
            out.as_deref(),
        ),
        Command::AgingReport {
            baseline,
            rejuvenated,
            from_projections,
            out,
        } => commands::aging_report(
            baseline.as_deref(),
            rejuvenated.as_deref(),
            from_projections.as_deref(),
            global.horizon_s,
            global.threshold_ms,
            global.format.unwrap_or(Format::Csv),
            out.as_deref(),
        ),
        Command::Synth { spec, out, plan } => {
            commands::synth(&spec, &out, plan.as_deref(), global.seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankUnitArg {
    Process,
    Task,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful outputs.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("agetrace: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
