//! CLI entry points, exposed as a library API so they stay scriptable and
//! testable. Each command takes the fully resolved [`RunConfig`] (TOML +
//! environment + flag overrides, resolved by the binary), embeds that config
//! in its outputs for provenance, and returns a structured outcome; the
//! binary turns outcomes into console text and process exit codes.
//!
//! Exit-code contract: 0 success, 1 fatal (returned as [`CmdError`]),
//! 2 partial (command finished but skipped some inputs or cells).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::ingest::{
    index_sessions, load_metadata, parse_file_name, parse_recording, summarize_metadata,
    ColumnSchema, MetaSummary, ParseReport, SessionIndex, Task,
};
use crate::nn::{build_model, save_checkpoint, ModelKind, ModelSpec};
use crate::preprocess::{
    apply_normalizer, fit_normalizer, make_windows, repair_gaps, write_window_cache,
    Normalization, Window,
};
use crate::report::{group_variance_series, render_series_csv, write_report, ReportSummary};
use crate::stats::{
    subjective_battery, variance_battery, Eye, Signal, SubjectiveBattery, VarianceCell,
    VARIANCE_STRIDE_S, VARIANCE_WINDOW_S,
};
use crate::train::grid::write_atomic;
use crate::train::{derived_seed, evaluate, run_grid, split_users, train, EvalResult, GridSummary};

#[derive(Debug, thiserror::Error)]
pub enum CmdError {
    #[error("no recordings found: {0}")]
    NoRecordings(String),
    #[error("nothing to do: {0}")]
    Empty(String),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error(transparent)]
    Preprocess(#[from] crate::preprocess::PreprocessError),
    #[error(transparent)]
    Train(#[from] crate::train::TrainError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Non-fatal completion state, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    /// Finished, but some inputs were skipped or some cells failed.
    Partial,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Partial => 2,
        }
    }
}

/// Recording CSVs under `data_dir` in sorted order, excluding the metadata
/// file when it lives in the same directory.
fn list_recording_files(data_dir: &Path, meta_path: &Path) -> Result<Vec<PathBuf>, CmdError> {
    let entries = fs::read_dir(data_dir).map_err(|e| {
        CmdError::NoRecordings(format!("cannot read {}: {e}", data_dir.display()))
    })?;
    let meta_canon = fs::canonicalize(meta_path).ok();
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let is_csv = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if !is_csv {
            continue;
        }
        if meta_canon.is_some() && fs::canonicalize(&path).ok() == meta_canon {
            continue;
        }
        files.push(path);
    }
    files.sort();
    Ok(files)
}

/// Parsed dataset plus everything needed to report on the parse.
pub struct LoadedData {
    pub index: SessionIndex,
    pub reports: Vec<ParseReport>,
    /// (path, error) per unparseable file.
    pub failures: Vec<(String, String)>,
    pub meta_summary: MetaSummary,
    pub warnings: Vec<String>,
}

/// Walks `data_dir`, parses every recording CSV (optionally only those of
/// one task, judged by file name), loads metadata, and indexes sessions.
/// Individual file failures are collected, not fatal; an empty result is.
pub fn load_data(cfg: &RunConfig, task_filter: Option<Task>) -> Result<LoadedData, CmdError> {
    let files = list_recording_files(&cfg.data_dir, &cfg.meta_path)?;
    if files.is_empty() {
        return Err(CmdError::NoRecordings(format!(
            "no recordings found in {}",
            cfg.data_dir.display()
        )));
    }
    let schema = ColumnSchema::default();
    let mut recordings = Vec::new();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for path in &files {
        let named_task = match parse_file_name(path) {
            Ok((_, _, task)) => task,
            Err(e) => {
                failures.push((path.display().to_string(), e.to_string()));
                continue;
            }
        };
        if task_filter.is_some_and(|t| t != named_task) {
            continue;
        }
        match parse_recording(path, &schema) {
            Ok((rec, report)) => {
                recordings.push(rec);
                reports.push(report);
            }
            Err(e) => failures.push((path.display().to_string(), e.to_string())),
        }
    }
    if recordings.is_empty() {
        return Err(CmdError::NoRecordings(format!(
            "no recordings found in {} ({} file(s) failed to parse{})",
            cfg.data_dir.display(),
            failures.len(),
            task_filter.map(|t| format!(", task filter {t}")).unwrap_or_default(),
        )));
    }
    let meta = load_metadata(&cfg.meta_path)?;
    let meta_summary = summarize_metadata(&meta.metas);
    let mut warnings = meta.warnings.clone();
    let index = index_sessions(recordings, &meta.metas);
    if !index.orphans.is_empty() {
        warnings.push(format!(
            "{} participant(s) have recordings but no metadata: {}",
            index.orphans.len(),
            index.orphans.join(", ")
        ));
    }
    Ok(LoadedData { index, reports, failures, meta_summary, warnings })
}

/// Windows for every labeled recording of one (task, duration), in index
/// order, gap-repaired but not normalized (normalization is fitted per
/// training run).
pub fn cut_task_windows(
    index: &SessionIndex,
    task: Task,
    duration_s: u32,
    cfg: &RunConfig,
) -> Result<Vec<Window>, CmdError> {
    let mut windows = Vec::new();
    for &ri in &index.recordings_for_task(task) {
        let rec = &index.recordings[ri];
        let Some(meta) = index.meta_by_participant.get(&rec.participant_id) else {
            continue;
        };
        let repaired = repair_gaps(rec, &cfg.train.channels);
        windows.extend(make_windows(&repaired, meta, duration_s, &cfg.train.channels)?);
    }
    Ok(windows)
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), CmdError> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

#[derive(Debug)]
pub struct SynthOutcome {
    pub data_dir: PathBuf,
    pub meta_path: PathBuf,
    /// Recording files written (metadata excluded).
    pub n_recordings: usize,
    pub n_participants: usize,
    pub status: ExitStatus,
}

/// Generates a synthetic labeled corpus into `cfg.data_dir` (recordings plus
/// `metadata.csv`) so the full pipeline can run without any licensed data.
pub fn cmd_synth(
    cfg: &RunConfig,
    synth: &crate::synth::SynthConfig,
) -> Result<SynthOutcome, CmdError> {
    fs::create_dir_all(&cfg.data_dir)?;
    let files = crate::synth::write_synth_corpus(&cfg.data_dir, synth)?;
    Ok(SynthOutcome {
        data_dir: cfg.data_dir.clone(),
        meta_path: cfg.data_dir.join("metadata.csv"),
        n_recordings: files.len(),
        n_participants: synth.n_participants,
        status: ExitStatus::Success,
    })
}

#[derive(Debug)]
pub struct IngestOutcome {
    pub reports: Vec<ParseReport>,
    pub failures: Vec<(String, String)>,
    pub n_recordings: usize,
    pub caches_written: Vec<PathBuf>,
    pub n_windows_cached: usize,
    pub meta_summary: MetaSummary,
    pub warnings: Vec<String>,
    pub report_path: PathBuf,
    pub status: ExitStatus,
}

#[derive(Serialize)]
struct IngestReportFile<'a> {
    config: &'a RunConfig,
    config_hash: String,
    meta_summary: &'a MetaSummary,
    files: &'a [ParseReport],
    failures: &'a [(String, String)],
    warnings: &'a [String],
}

/// Parses every recording under `data_dir`, writes per-(task, duration)
/// window caches for the selected grid into `cache_dir`, and writes
/// `ingest_report.json` with per-file diagnostics. Unparseable files are
/// listed and skipped ([`ExitStatus::Partial`]); an empty or unreadable
/// dataset is fatal.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestOutcome, CmdError> {
    cfg.validate()?;
    let data = load_data(cfg, None)?;
    let config_hash = cfg.config_hash();
    fs::create_dir_all(&cfg.cache_dir)?;

    let mut caches_written = Vec::new();
    let mut n_windows_cached = 0usize;
    let mut warnings = data.warnings.clone();
    for &task in &cfg.grid.tasks {
        for &duration_s in &cfg.grid.durations_s {
            let windows = cut_task_windows(&data.index, task, duration_s, cfg)?;
            if windows.is_empty() {
                warnings.push(format!("no windows for {task} at {duration_s} s; cache skipped"));
                continue;
            }
            let path = cfg.cache_dir.join(format!("{task}_{duration_s}s.win"));
            let tmp = path.with_extension("win.tmp");
            write_window_cache(&tmp, &windows, &config_hash, cfg.dtype)?;
            fs::rename(&tmp, &path)?;
            n_windows_cached += windows.len();
            caches_written.push(path);
        }
    }

    let report_path = cfg.cache_dir.join("ingest_report.json");
    write_json_atomic(
        &report_path,
        &IngestReportFile {
            config: cfg,
            config_hash,
            meta_summary: &data.meta_summary,
            files: &data.reports,
            failures: &data.failures,
            warnings: &warnings,
        },
    )?;
    let status = if data.failures.is_empty() { ExitStatus::Success } else { ExitStatus::Partial };
    Ok(IngestOutcome {
        n_recordings: data.reports.len(),
        reports: data.reports,
        failures: data.failures,
        caches_written,
        n_windows_cached,
        meta_summary: data.meta_summary,
        warnings,
        report_path,
        status,
    })
}

#[derive(Debug)]
pub struct WindowsOutcome {
    pub task: Task,
    pub duration_s: u32,
    pub n_recordings: usize,
    pub n_windows: usize,
    pub n_participants: usize,
    pub cache_path: PathBuf,
    pub failures: Vec<(String, String)>,
    pub status: ExitStatus,
}

/// Cuts and caches the windows of a single (task, duration) pair — a
/// targeted refresh of one [`cmd_ingest`] cache.
pub fn cmd_windows(cfg: &RunConfig, task: Task, duration_s: u32) -> Result<WindowsOutcome, CmdError> {
    cfg.validate()?;
    let data = load_data(cfg, Some(task))?;
    let windows = cut_task_windows(&data.index, task, duration_s, cfg)?;
    if windows.is_empty() {
        return Err(CmdError::Empty(format!(
            "no windows produced for {task} at {duration_s} s (too short or too many gaps)"
        )));
    }
    let participants: BTreeSet<&str> =
        windows.iter().map(|w| w.participant_id.as_str()).collect();
    fs::create_dir_all(&cfg.cache_dir)?;
    let cache_path = cfg.cache_dir.join(format!("{task}_{duration_s}s.win"));
    let tmp = cache_path.with_extension("win.tmp");
    write_window_cache(&tmp, &windows, &cfg.config_hash(), cfg.dtype)?;
    fs::rename(&tmp, &cache_path)?;
    let status = if data.failures.is_empty() { ExitStatus::Success } else { ExitStatus::Partial };
    Ok(WindowsOutcome {
        task,
        duration_s,
        n_recordings: data.reports.len(),
        n_windows: windows.len(),
        n_participants: participants.len(),
        cache_path,
        failures: data.failures,
        status,
    })
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub result: EvalResult,
    pub loss_curve: Vec<f64>,
    pub train_participants: Vec<String>,
    pub test_participants: Vec<String>,
    pub checkpoint_path: PathBuf,
    pub summary_path: PathBuf,
    pub status: ExitStatus,
}

#[derive(Serialize)]
struct TrainSummaryFile<'a> {
    config: &'a RunConfig,
    result: &'a EvalResult,
    loss_curve: &'a [f64],
    train_participants: &'a [String],
    test_participants: &'a [String],
}

/// Trains and evaluates one (task, model, duration) cell outside the grid,
/// with the same per-task split and per-cell seed the grid would use, and
/// writes a checkpoint plus a JSON summary under `results_dir/train/`.
pub fn cmd_train(
    cfg: &RunConfig,
    task: Task,
    model_kind: ModelKind,
    duration_s: u32,
) -> Result<TrainOutcome, CmdError> {
    cfg.validate()?;
    let data = load_data(cfg, Some(task))?;
    let index = &data.index;

    let mut ids: Vec<String> = Vec::new();
    let mut labels: Vec<bool> = Vec::new();
    for ((participant, t), recs) in &index.buckets {
        if *t == task && !recs.is_empty() {
            if let Some(label) = index.label_of(participant) {
                ids.push(participant.clone());
                labels.push(label);
            }
        }
    }
    if ids.is_empty() {
        return Err(CmdError::Empty(format!("no labeled recordings for task {task}")));
    }
    let split_seed = derived_seed(cfg.train.seed, &["split", &task.to_string()]);
    let (train_ids, test_ids) =
        split_users(&ids, &labels, cfg.train.split_fraction, split_seed, cfg.train.stratify)?;

    let all = cut_task_windows(index, task, duration_s, cfg)?;
    let train_set: BTreeSet<&str> = train_ids.iter().map(String::as_str).collect();
    let test_set: BTreeSet<&str> = test_ids.iter().map(String::as_str).collect();
    let (mut train_w, mut test_w): (Vec<Window>, Vec<Window>) = (Vec::new(), Vec::new());
    for w in all {
        if train_set.contains(w.participant_id.as_str()) {
            train_w.push(w);
        } else if test_set.contains(w.participant_id.as_str()) {
            test_w.push(w);
        }
    }
    if cfg.train.channels.normalization == Normalization::ZscoreTrainStats {
        if train_w.is_empty() {
            return Err(CmdError::Empty(format!(
                "no training windows for {task} at {duration_s} s"
            )));
        }
        let nrm = fit_normalizer(&train_w)?;
        for w in train_w.iter_mut().chain(test_w.iter_mut()) {
            *w = apply_normalizer(w, &nrm);
        }
    }

    let input_len = train_w
        .first()
        .map(|w| w.len())
        .unwrap_or((duration_s as f64 * 250.0).round() as usize);
    let cell_seed = derived_seed(cfg.train.seed, &[
        "cell",
        &task.to_string(),
        &model_kind.to_string(),
        &duration_s.to_string(),
    ]);
    let mut model = build_model(&ModelSpec::new(model_kind, input_len, cell_seed))?;
    let loss_curve = train(&mut model, &train_w, &cfg.train)?;
    let mut result = evaluate(&mut model, &test_w)?;
    let config_hash = cfg.config_hash();
    result.config_hash = config_hash.clone();

    let train_dir = cfg.results_dir.join("train");
    fs::create_dir_all(&train_dir)?;
    let stem = format!("{task}_{model_kind}_{duration_s}s");
    let checkpoint_path = train_dir.join(format!("{stem}.ckpt.json"));
    save_checkpoint(&model, &checkpoint_path, &config_hash, cfg.dtype)?;
    let summary_path = train_dir.join(format!("{stem}.json"));
    write_json_atomic(
        &summary_path,
        &TrainSummaryFile {
            config: cfg,
            result: &result,
            loss_curve: &loss_curve,
            train_participants: &train_ids,
            test_participants: &test_ids,
        },
    )?;
    let status = if data.failures.is_empty() { ExitStatus::Success } else { ExitStatus::Partial };
    Ok(TrainOutcome {
        result,
        loss_curve,
        train_participants: train_ids,
        test_participants: test_ids,
        checkpoint_path,
        summary_path,
        status,
    })
}

#[derive(Debug)]
pub struct GridOutcome {
    pub summary: GridSummary,
    pub results_csv: PathBuf,
    pub config_path: PathBuf,
    pub status: ExitStatus,
}

#[derive(Serialize)]
struct ConfigSnapshot<'a> {
    config: &'a RunConfig,
    config_hash: String,
}

/// Runs the selected experiment grid over the dataset (resuming completed
/// cells) and snapshots the resolved config next to the results. Cell
/// failures yield [`ExitStatus::Partial`]; the remaining cells still run.
pub fn cmd_grid(cfg: &RunConfig) -> Result<GridOutcome, CmdError> {
    cfg.validate()?;
    let data = load_data(cfg, None)?;
    fs::create_dir_all(&cfg.results_dir)?;
    let config_path = cfg.results_dir.join("run_config.json");
    write_json_atomic(&config_path, &ConfigSnapshot { config: cfg, config_hash: cfg.config_hash() })?;
    let summary = run_grid(&data.index, cfg)?;
    let status = if summary.failures.is_empty() && data.failures.is_empty() {
        ExitStatus::Success
    } else {
        ExitStatus::Partial
    };
    Ok(GridOutcome {
        summary,
        results_csv: cfg.results_dir.join("results.csv"),
        config_path,
        status,
    })
}

#[derive(Debug)]
pub struct StatsOutcome {
    pub variance_cells: Vec<VarianceCell>,
    pub subjective: SubjectiveBattery,
    pub variance_csv: PathBuf,
    pub subjective_csv: PathBuf,
    pub series_files: Vec<PathBuf>,
    pub stats_json: PathBuf,
    pub warnings: Vec<String>,
    pub status: ExitStatus,
}

#[derive(Serialize)]
struct StatsReportFile<'a> {
    config: &'a RunConfig,
    config_hash: String,
    variance: &'a [VarianceCell],
    subjective: &'a SubjectiveBattery,
    warnings: &'a [String],
}

/// Runs both statistical batteries over the dataset and writes them as
/// CSV + Markdown under `results_dir/stats/`, plus plot-ready group-mean
/// variance-over-time series per (task, signal, eye).
pub fn cmd_stats(cfg: &RunConfig) -> Result<StatsOutcome, CmdError> {
    cfg.validate()?;
    let data = load_data(cfg, None)?;
    let index = &data.index;
    let stats_dir = cfg.results_dir.join("stats");
    fs::create_dir_all(&stats_dir)?;

    let cells = variance_battery(index);
    let variance_csv = stats_dir.join("variance_battery.csv");
    write_atomic(&variance_csv, crate::report::render_variance_csv(&cells).as_bytes())?;
    write_atomic(
        &stats_dir.join("variance_battery.md"),
        crate::report::render_variance_markdown(&cells).as_bytes(),
    )?;

    let battery = subjective_battery(index.meta_by_participant.values().cloned().collect::<Vec<_>>().as_slice());
    let subjective_csv = stats_dir.join("subjective.csv");
    write_atomic(&subjective_csv, crate::report::render_subjective_csv(&battery).as_bytes())?;
    write_atomic(
        &stats_dir.join("subjective.md"),
        crate::report::render_subjective_markdown(&battery).as_bytes(),
    )?;

    let mut warnings = data.warnings.clone();
    warnings.extend(battery.warnings.iter().cloned());
    let mut series_files = Vec::new();
    for task in Task::ALL {
        for signal in Signal::ALL {
            for eye in Eye::ALL {
                let points = group_variance_series(
                    index,
                    task,
                    signal,
                    eye,
                    VARIANCE_WINDOW_S,
                    VARIANCE_STRIDE_S,
                );
                if points.is_empty() {
                    continue;
                }
                let path = stats_dir.join(format!("series_{task}_{signal}_{eye}.csv"));
                write_atomic(&path, render_series_csv(&points).as_bytes())?;
                series_files.push(path);
            }
        }
    }

    let stats_json = stats_dir.join("stats_report.json");
    write_json_atomic(
        &stats_json,
        &StatsReportFile {
            config: cfg,
            config_hash: cfg.config_hash(),
            variance: &cells,
            subjective: &battery,
            warnings: &warnings,
        },
    )?;
    let status = if data.failures.is_empty() { ExitStatus::Success } else { ExitStatus::Partial };
    Ok(StatsOutcome {
        variance_cells: cells,
        subjective: battery,
        variance_csv,
        subjective_csv,
        series_files,
        stats_json,
        warnings,
        status,
    })
}

#[derive(Debug)]
pub struct ReportOutcome {
    pub report_dir: PathBuf,
    pub summary: ReportSummary,
    pub status: ExitStatus,
}

/// Renders the grid results under `results_dir` into
/// `results_dir/report/`: five per-task accuracy tables (Markdown + CSV)
/// and per-cell ROC point files. Missing cells render blank with warnings
/// and [`ExitStatus::Partial`].
pub fn cmd_report(cfg: &RunConfig) -> Result<ReportOutcome, CmdError> {
    let report_dir = cfg.results_dir.join("report");
    let summary = write_report(&cfg.results_dir, &report_dir)?;
    write_json_atomic(
        &report_dir.join("config.json"),
        &ConfigSnapshot { config: cfg, config_hash: cfg.config_hash() },
    )?;
    let status =
        if summary.warnings.is_empty() { ExitStatus::Success } else { ExitStatus::Partial };
    Ok(ReportOutcome { report_dir, summary, status })
}
