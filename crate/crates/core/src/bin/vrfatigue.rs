//! Command-line front end: resolves the run configuration (TOML file,
//! environment overrides, then CLI flags), dispatches to the library
//! command layer, and prints human-readable summaries.
//!
//! Exit codes: 0 success, 1 fatal error, 2 finished with partial failures.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use vrfatigue::commands::{
    cmd_grid, cmd_ingest, cmd_report, cmd_stats, cmd_synth, cmd_train, cmd_windows, CmdError,
    ExitStatus,
};
use vrfatigue::config::{apply_env_overrides, load_config, RunConfig};
use vrfatigue::ingest::Task;
use vrfatigue::nn::ModelKind;
use vrfatigue::synth::SynthConfig;

/// Prints to stdout, ignoring broken pipes so `vrfatigue … | head` exits
/// cleanly instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stdout(), $($arg)*);
    };
}

/// Prints to stderr, ignoring broken pipes.
macro_rules! warn {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stderr(), $($arg)*);
    };
}

fn parse_task(s: &str) -> Result<Task, String> {
    Task::from_str(s).map_err(|e| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::from_str(s).map_err(|e| e.to_string())
}

/// Flag overrides applied on top of the TOML config and environment.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Directory of per-recording gaze CSVs.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Participant metadata CSV (defaults to `<data-dir>/metadata.csv`
    /// when --data-dir is given without --meta).
    #[arg(long, global = true)]
    meta: Option<PathBuf>,
    /// Window-cache directory.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Results and report directory.
    #[arg(long, global = true)]
    results_dir: Option<PathBuf>,
    /// Base RNG seed for splits, initialization, and batch order.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training epochs per cell.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Minibatch size.
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Optimizer learning rate.
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    /// Train-eval worker threads (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Restrict the grid to these tasks (repeatable or comma-separated).
    #[arg(long, global = true, value_parser = parse_task, value_delimiter = ',')]
    tasks: Option<Vec<Task>>,
    /// Restrict the grid to these models (repeatable or comma-separated).
    #[arg(long, global = true, value_parser = parse_model, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    /// Restrict the grid to these window lengths in seconds.
    #[arg(long, global = true, value_delimiter = ',')]
    durations: Option<Vec<u32>>,
}

#[derive(Parser, Debug)]
#[command(
    name = "vrfatigue",
    version,
    about = "Visual-fatigue detection from VR eye tracking: ingest, windowing, model grid, statistics, and report rendering"
)]
struct Cli {
    /// TOML run configuration; omitted keys take built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled corpus into the data directory so the
    /// full pipeline can run without any licensed dataset.
    Synth {
        /// Cohort size (labels alternate non-fatigued/fatigued).
        #[arg(long, default_value_t = 40)]
        participants: usize,
        /// Length of each recording in seconds.
        #[arg(long, default_value_t = 15.0)]
        seconds: f64,
        /// Tasks to generate (defaults to all five).
        #[arg(long, value_parser = parse_task, value_delimiter = ',')]
        synth_tasks: Option<Vec<Task>>,
        /// Seed of the generator (independent of the training seed).
        #[arg(long, default_value_t = 7)]
        synth_seed: u64,
    },
    /// Parse recordings and metadata, build window caches, and write a
    /// per-file parse report.
    Ingest,
    /// Cut and cache the windows of one task and window length.
    Windows {
        /// Task whose recordings to window (VRG, PUR, VID, TEX, or RAN).
        #[arg(long, value_parser = parse_task)]
        task: Task,
        /// Window length in seconds (5, 10, 15, or 20).
        #[arg(long)]
        duration: u32,
    },
    /// Train and evaluate a single (task, model, window-length) cell.
    Train {
        /// Task whose recordings to train on (VRG, PUR, VID, TEX, or RAN).
        #[arg(long, value_parser = parse_task)]
        task: Task,
        /// Architecture (EKYT, FCN, TCN, MCDCNN, TLENET, or INCEPTION).
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
        /// Window length in seconds (5, 10, 15, or 20).
        #[arg(long)]
        duration: u32,
    },
    /// Run the experiment grid (all selected task × model × window cells),
    /// resuming completed cells.
    Grid,
    /// Run the gaze-variance and subjective-ratings batteries and emit
    /// plot-ready variance-over-time series.
    Stats,
    /// Render per-task accuracy tables and ROC point files from grid
    /// results.
    Report,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, CmdError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => {
            let mut cfg = RunConfig::default();
            apply_env_overrides(&mut cfg);
            cfg
        }
    };
    let o = &cli.overrides;
    if let Some(v) = &o.data_dir {
        cfg.data_dir = v.clone();
        // keep the metadata default inside the chosen data directory unless
        // a config file or --meta names it explicitly
        if o.meta.is_none() && cli.config.is_none() {
            cfg.meta_path = v.join("metadata.csv");
        }
    }
    if let Some(v) = &o.meta {
        cfg.meta_path = v.clone();
    }
    if let Some(v) = &o.cache_dir {
        cfg.cache_dir = v.clone();
    }
    if let Some(v) = &o.results_dir {
        cfg.results_dir = v.clone();
    }
    if let Some(v) = o.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = o.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = o.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = o.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = o.workers {
        cfg.workers = v;
    }
    if let Some(v) = &o.tasks {
        cfg.grid.tasks = v.clone();
    }
    if let Some(v) = &o.models {
        cfg.grid.models = v.clone();
    }
    if let Some(v) = &o.durations {
        cfg.grid.durations_s = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitStatus, CmdError> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Synth { participants, seconds, synth_tasks, synth_seed } => {
            let synth = SynthConfig {
                n_participants: *participants,
                recording_s: *seconds,
                tasks: synth_tasks.clone().unwrap_or_else(|| Task::ALL.to_vec()),
                seed: *synth_seed,
                ..SynthConfig::default()
            };
            let out = cmd_synth(&cfg, &synth)?;
            out!(
                "wrote {} recording(s) for {} participant(s) to {}",
                out.n_recordings,
                out.n_participants,
                out.data_dir.display()
            );
            out!("metadata: {}", out.meta_path.display());
            Ok(out.status)
        }
        Command::Ingest => {
            let out = cmd_ingest(&cfg)?;
            out!(
                "parsed {} recording(s) from {} ({} failed)",
                out.n_recordings,
                cfg.data_dir.display(),
                out.failures.len()
            );
            out!(
                "participants: {} ({} fatigued, {} non-fatigued)",
                out.meta_summary.n_participants,
                out.meta_summary.n_fatigued,
                out.meta_summary.n_non_fatigued
            );
            for (path, err) in &out.failures {
                warn!("  failed: {path}: {err}");
            }
            for w in &out.warnings {
                warn!("  warning: {w}");
            }
            out!(
                "cached {} window(s) in {} cache file(s) under {}",
                out.n_windows_cached,
                out.caches_written.len(),
                cfg.cache_dir.display()
            );
            out!("parse report: {}", out.report_path.display());
            Ok(out.status)
        }
        Command::Windows { task, duration } => {
            let out = cmd_windows(&cfg, *task, *duration)?;
            out!(
                "{}/{} s: {} window(s) from {} participant(s) ({} recordings)",
                out.task, out.duration_s, out.n_windows, out.n_participants, out.n_recordings
            );
            for (path, err) in &out.failures {
                warn!("  failed: {path}: {err}");
            }
            out!("cache: {}", out.cache_path.display());
            Ok(out.status)
        }
        Command::Train { task, model, duration } => {
            out!("training {task}/{model}/{duration}s ({} epochs)…", cfg.train.epochs);
            let out = cmd_train(&cfg, *task, *model, *duration)?;
            let r = &out.result;
            out!(
                "{}/{}/{}s: accuracy {:.4}, AUC {:.4} ({} test windows, {} test participants)",
                r.task,
                r.model,
                r.duration_s,
                r.accuracy,
                r.auc,
                r.n_test_windows,
                r.n_test_participants
            );
            out!("checkpoint: {}", out.checkpoint_path.display());
            out!("summary:    {}", out.summary_path.display());
            Ok(out.status)
        }
        Command::Grid => {
            out!(
                "running grid: {} cell(s) selected, {} worker(s)…",
                cfg.grid.n_cells(),
                cfg.effective_workers()
            );
            let out = cmd_grid(&cfg)?;
            out!(
                "grid complete: {} trained, {} resumed, {} failed",
                out.summary.trained,
                out.summary.resumed,
                out.summary.failures.len()
            );
            for (key, msg) in &out.summary.failures {
                warn!("  failed {key}: {msg}");
            }
            out!("results: {}", out.results_csv.display());
            Ok(out.status)
        }
        Command::Stats => {
            let out = cmd_stats(&cfg)?;
            out!(
                "variance battery: {} row(s) → {}",
                out.variance_cells.len(),
                out.variance_csv.display()
            );
            out!(
                "subjective battery: {} measure(s) → {}",
                out.subjective.measures.len(),
                out.subjective_csv.display()
            );
            out!("variance-over-time series: {} file(s)", out.series_files.len());
            for w in &out.warnings {
                warn!("  warning: {w}");
            }
            Ok(out.status)
        }
        Command::Report => {
            let out = cmd_report(&cfg)?;
            out!(
                "report: {} table(s), {} ROC file(s), {} missing cell(s) → {}",
                out.summary.tables_written,
                out.summary.roc_files_written,
                out.summary.missing_cells,
                out.report_dir.display()
            );
            for task in vrfatigue::report::REPORT_TASK_ORDER {
                let path = out.report_dir.join(format!("accuracy_{task}.md"));
                if let Ok(table) = std::fs::read_to_string(&path) {
                    out!("\n{table}");
                }
            }
            if !out.summary.warnings.is_empty() {
                warn!("{} warning(s):", out.summary.warnings.len());
                for w in out.summary.warnings.iter().take(12) {
                    warn!("  warning: {w}");
                }
                if out.summary.warnings.len() > 12 {
                    warn!("  … and {} more", out.summary.warnings.len() - 12);
                }
            }
            Ok(out.status)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            warn!("error: {e}");
            ExitCode::from(1)
        }
    }
}
