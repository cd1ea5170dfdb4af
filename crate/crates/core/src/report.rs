//! Result rendering: per-task accuracy tables (Markdown + CSV), ROC point
//! files for external plotting, the subjective-ratings table, the variance
//! battery, and variance-over-time plot data.
//!
//! Accuracy tables follow the layout of the original full-dataset study —
//! one table per task, rows = models, columns = window lengths — and print
//! that study's reported accuracies alongside new results for comparison.
//! The bundled reference values depend on the complete licensed dataset and
//! are not reproduction targets.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{SessionIndex, Task};
use crate::nn::ModelKind;
use crate::preprocess::WINDOW_DURATIONS_S;
use crate::stats::{
    variance_series, Eye, Group, Signal, SubjectiveBattery, SubjectiveMeasure, TestOutcome,
    VarianceCell,
};
use crate::train::{CellFile, CellKey};

/// Task order of the rendered tables (matches the reference study's table
/// sequence).
pub const REPORT_TASK_ORDER: [Task; 5] = [Task::PUR, Task::RAN, Task::TEX, Task::VID, Task::VRG];

/// Model row order of the rendered tables.
pub const REPORT_MODEL_ORDER: [ModelKind; 6] = [
    ModelKind::EKYT,
    ModelKind::FCN,
    ModelKind::TCN,
    ModelKind::MCDCNN,
    ModelKind::TLENET,
    ModelKind::INCEPTION,
];

/// Reference accuracies of the original full-dataset experiments, in
/// [`REPORT_MODEL_ORDER`] rows × window columns [5, 10, 15, 20] s.
fn reference_table(task: Task) -> [[f64; 4]; 6] {
    match task {
        Task::PUR => [
            [0.734, 0.945, 0.814, 0.673],
            [0.749, 0.804, 0.648, 0.802],
            [0.562, 0.758, 0.658, 0.728],
            [0.653, 0.779, 0.899, 0.919],
            [0.704, 0.749, 0.864, 0.834],
            [0.583, 0.603, 0.719, 0.588],
        ],
        Task::RAN => [
            [0.744, 0.683, 0.915, 0.844],
            [0.563, 0.593, 0.588, 0.884],
            [0.643, 0.568, 0.603, 0.653],
            [0.553, 0.724, 0.905, 0.558],
            [0.655, 0.542, 0.688, 0.601],
            [0.633, 0.588, 0.562, 0.583],
        ],
        Task::TEX => [
            [0.558, 0.618, 0.694, 0.603],
            [0.719, 0.708, 0.854, 0.895],
            [0.673, 0.589, 0.608, 0.623],
            [0.587, 0.788, 0.698, 0.904],
            [0.562, 0.910, 0.643, 0.859],
            [0.683, 0.578, 0.603, 0.598],
        ],
        Task::VID => [
            [0.598, 0.583, 0.608, 0.538],
            [0.578, 0.929, 0.774, 0.915],
            [0.573, 0.729, 0.824, 0.553],
            [0.673, 0.618, 0.769, 0.930],
            [0.543, 0.914, 0.895, 0.935],
            [0.582, 0.653, 0.613, 0.578],
        ],
        Task::VRG => [
            [0.824, 0.809, 0.835, 0.784],
            [0.608, 0.809, 0.925, 0.658],
            [0.563, 0.729, 0.638, 0.658],
            [0.788, 0.901, 0.915, 0.699],
            [0.774, 0.945, 0.869, 0.909],
            [0.513, 0.603, 0.563, 0.577],
        ],
    }
}

/// Reference accuracy of one grid cell, if the window length is one of the
/// four standard durations.
pub fn reference_accuracy(task: Task, model: ModelKind, window_s: u32) -> Option<f64> {
    let row = REPORT_MODEL_ORDER.iter().position(|&m| m == model)?;
    let col = WINDOW_DURATIONS_S.iter().position(|&w| w == window_s)?;
    Some(reference_table(task)[row][col])
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("cannot parse {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One parsed row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: Task,
    pub model: ModelKind,
    pub window_s: u32,
    pub accuracy: f64,
    pub auc: f64,
    pub n_test: usize,
    pub seed: u64,
    pub participant_accuracy: f64,
}

/// Loads the grid summary CSV written by a grid run.
pub fn load_results_csv(path: &Path) -> Result<Vec<ResultRow>, ReportError> {
    let path_str = path.display().to_string();
    if !path.exists() {
        return Err(ReportError::MissingInput(format!("results file {path_str} not found")));
    }
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| ReportError::Parse { path: path_str.clone(), detail: e.to_string() })?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| ReportError::Parse { path: path_str.clone(), detail: e.to_string() })?;
        let field = |j: usize, name: &str| -> Result<&str, ReportError> {
            record.get(j).ok_or_else(|| ReportError::Parse {
                path: path_str.clone(),
                detail: format!("row {}: missing column {name}", i + 1),
            })
        };
        let parse_err = |name: &str, v: &str| ReportError::Parse {
            path: path_str.clone(),
            detail: format!("row {}: bad {name} `{v}`", i + 1),
        };
        let task_s = field(0, "task")?;
        let model_s = field(1, "model")?;
        rows.push(ResultRow {
            task: Task::from_str(task_s).map_err(|_| parse_err("task", task_s))?,
            model: ModelKind::from_str(model_s).map_err(|_| parse_err("model", model_s))?,
            window_s: field(2, "window_s")?
                .parse()
                .map_err(|_| parse_err("window_s", record.get(2).unwrap_or("")))?,
            accuracy: field(3, "accuracy")?
                .parse()
                .map_err(|_| parse_err("accuracy", record.get(3).unwrap_or("")))?,
            auc: field(4, "auc")?
                .parse()
                .map_err(|_| parse_err("auc", record.get(4).unwrap_or("")))?,
            n_test: field(5, "n_test")?
                .parse()
                .map_err(|_| parse_err("n_test", record.get(5).unwrap_or("")))?,
            seed: field(6, "seed")?
                .parse()
                .map_err(|_| parse_err("seed", record.get(6).unwrap_or("")))?,
            participant_accuracy: field(7, "participant_accuracy")?
                .parse()
                .map_err(|_| parse_err("participant_accuracy", record.get(7).unwrap_or("")))?,
        });
    }
    Ok(rows)
}

/// One task's 6 × 4 accuracy matrix with bundled reference values and the
/// coordinates of cells that have no result yet.
#[derive(Debug, Clone)]
pub struct TaskTable {
    pub task: Task,
    /// Accuracy per \[model]\[window], in [`REPORT_MODEL_ORDER`] ×
    /// [`WINDOW_DURATIONS_S`] order; `None` where no result exists.
    pub accuracy: [[Option<f64>; 4]; 6],
    pub reference: [[f64; 4]; 6],
    pub missing: Vec<(ModelKind, u32)>,
}

/// Collects one task's results into the fixed 6 × 4 table shape. Duplicate
/// rows for a cell keep the last occurrence.
pub fn task_table(task: Task, rows: &[ResultRow]) -> TaskTable {
    let mut accuracy = [[None; 4]; 6];
    for r in rows.iter().filter(|r| r.task == task) {
        let Some(i) = REPORT_MODEL_ORDER.iter().position(|&m| m == r.model) else {
            continue;
        };
        let Some(j) = WINDOW_DURATIONS_S.iter().position(|&w| w == r.window_s) else {
            continue;
        };
        accuracy[i][j] = Some(r.accuracy);
    }
    let mut missing = Vec::new();
    for (i, &model) in REPORT_MODEL_ORDER.iter().enumerate() {
        for (j, &w) in WINDOW_DURATIONS_S.iter().enumerate() {
            if accuracy[i][j].is_none() {
                missing.push((model, w));
            }
        }
    }
    TaskTable { task, accuracy, reference: reference_table(task), missing }
}

/// Renders the task table as Markdown: measured accuracy with the reference
/// value in parentheses, missing cells blank.
pub fn render_accuracy_markdown(table: &TaskTable) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "## {} accuracy by model and window length\n\nValues are held-out window-level \
         accuracy; parenthesized values are the reference accuracies of the original \
         full-dataset experiments.\n\n",
        table.task
    ));
    out.push_str("| Model | 5 s | 10 s | 15 s | 20 s |\n|---|---|---|---|---|\n");
    for (i, model) in REPORT_MODEL_ORDER.iter().enumerate() {
        out.push_str(&format!("| {model} |"));
        for j in 0..4 {
            match table.accuracy[i][j] {
                Some(a) => {
                    out.push_str(&format!(" {:.3} (ref {:.3}) |", a, table.reference[i][j]))
                }
                None => out.push_str("  |"),
            }
        }
        out.push('\n');
    }
    out
}

/// Renders the task table as CSV with measured and reference columns.
pub fn render_accuracy_csv(table: &TaskTable) -> String {
    let mut out = String::from("model,acc_5s,acc_10s,acc_15s,acc_20s,ref_5s,ref_10s,ref_15s,ref_20s\n");
    for (i, model) in REPORT_MODEL_ORDER.iter().enumerate() {
        out.push_str(&model.to_string());
        for j in 0..4 {
            match table.accuracy[i][j] {
                Some(a) => out.push_str(&format!(",{a:.6}")),
                None => out.push(','),
            }
        }
        for j in 0..4 {
            out.push_str(&format!(",{:.3}", table.reference[i][j]));
        }
        out.push('\n');
    }
    out
}

fn outcome_fields(outcome: &TestOutcome) -> (String, String, String, Option<String>) {
    match outcome {
        Ok(r) => (format!("{:.4}", r.t), format!("{:.6}", r.p), format!("{:.2}", r.df), None),
        Err(reason) => (String::new(), String::new(), String::new(), Some(reason.clone())),
    }
}

fn outcome_cell(outcome: &TestOutcome) -> String {
    match outcome {
        Ok(r) => format!("{:.2} ({:.4})", r.t, r.p),
        Err(_) => "—".to_string(),
    }
}

/// Renders the variance battery as CSV: one row per (task, eye, signal)
/// with group means and both test forms.
pub fn render_variance_csv(cells: &[VarianceCell]) -> String {
    let mut out = String::from(
        "task,eye,signal,n_no_fatigue,n_fatigue,mean_no_fatigue,mean_fatigue,\
         welch_t,welch_p,welch_df,pooled_t,pooled_p,pooled_df,notes\n",
    );
    for c in cells {
        let mean = |v: Option<f64>| v.map(|m| format!("{m:.6e}")).unwrap_or_default();
        let (wt, wp, wdf, werr) = outcome_fields(&c.welch);
        let (pt, pp, pdf, perr) = outcome_fields(&c.pooled);
        let notes = [werr, perr].into_iter().flatten().collect::<Vec<_>>().join("; ");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{wt},{wp},{wdf},{pt},{pp},{pdf},{}\n",
            c.task,
            c.eye,
            c.signal,
            c.n_no_fatigue,
            c.n_fatigue,
            mean(c.mean_no_fatigue),
            mean(c.mean_fatigue),
            csv_quote(&notes),
        ));
    }
    out
}

/// Renders the variance battery as a Markdown table (Welch column shown,
/// pooled in a second column).
pub fn render_variance_markdown(cells: &[VarianceCell]) -> String {
    let mut out = String::from(
        "## Gaze-variance comparison by task, eye, and signal\n\nPer-participant variance, \
         no-fatigue vs fatigue groups; cells show t (two-sided p).\n\n\
         | Task | Eye | Signal | No-fatigue mean | Fatigue mean | Welch t (p) | Pooled t (p) |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for c in cells {
        let mean = |v: Option<f64>| v.map(|m| format!("{m:.3e}")).unwrap_or_else(|| "—".into());
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            c.task,
            c.eye,
            c.signal,
            mean(c.mean_no_fatigue),
            mean(c.mean_fatigue),
            outcome_cell(&c.welch),
            outcome_cell(&c.pooled),
        ));
    }
    out
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders the subjective battery as CSV mirroring the reference table
/// layout: two group rows per measure carrying that group's means and
/// paired test, with the between-group statistics repeated on both rows.
pub fn render_subjective_csv(battery: &SubjectiveBattery) -> String {
    let mut out = String::from(
        "measure,group,n,pre_mean,post_mean,delta_mean,pre_group_t,pre_group_p,\
         post_group_t,post_group_p,paired_t,paired_p,delta_group_t,delta_group_p,notes\n",
    );
    for m in &battery.measures {
        for (gi, g) in m.groups.iter().enumerate() {
            let (pre_t, pre_p, _, e1) = outcome_fields(&m.pre_group);
            let (post_t, post_p, _, e2) = outcome_fields(&m.post_group);
            let (pair_t, pair_p, _, e3) = outcome_fields(&m.paired[gi]);
            let (d_t, d_p, _, e4) = outcome_fields(&m.delta_group);
            let notes = [e1, e2, e3, e4].into_iter().flatten().collect::<Vec<_>>().join("; ");
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.4},{pre_t},{pre_p},{post_t},{post_p},\
                 {pair_t},{pair_p},{d_t},{d_p},{}\n",
                m.measure,
                g.group,
                g.n,
                g.pre,
                g.post,
                g.delta,
                csv_quote(&notes),
            ));
        }
    }
    out
}

fn subjective_markdown_rows(m: &SubjectiveMeasure) -> String {
    let mut out = String::new();
    for (gi, g) in m.groups.iter().enumerate() {
        out.push_str(&format!(
            "| {} | {} | {} | {:.2} | {:.2} | {:+.2} | {} | {} | {} | {} |\n",
            if gi == 0 { m.measure.to_string() } else { String::new() },
            g.group,
            g.n,
            g.pre,
            g.post,
            g.delta,
            if gi == 0 { outcome_cell(&m.pre_group) } else { "".into() },
            if gi == 0 { outcome_cell(&m.post_group) } else { "".into() },
            outcome_cell(&m.paired[gi]),
            if gi == 0 { outcome_cell(&m.delta_group) } else { "".into() },
        ));
    }
    out
}

/// Renders the subjective battery as a Markdown table with the four
/// statistics columns.
pub fn render_subjective_markdown(battery: &SubjectiveBattery) -> String {
    let mut out = String::from(
        "## Subjective measures by fatigue group\n\nMeans of pre-session, post-session, and \
         change (Δ = post − pre) ratings; statistics columns show t (two-sided p). Group \
         comparisons are no-fatigue minus fatigue; paired tests are pre minus post.\n\n\
         | Measure | Group | N | Pre | Post | Δ | Pre-Group t (p) | Post-Group t (p) | \
         Paired t (p) | Δ Group t (p) |\n|---|---|---|---|---|---|---|---|---|---|\n",
    );
    for m in &battery.measures {
        out.push_str(&subjective_markdown_rows(m));
    }
    if !battery.warnings.is_empty() {
        out.push('\n');
        for w in &battery.warnings {
            out.push_str(&format!("- warning: {w}\n"));
        }
    }
    out
}

/// One group-mean point of a variance-over-time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub time_s: f64,
    pub group: Group,
    pub mean_variance: f64,
    /// Recordings contributing at this time offset.
    pub n: usize,
}

/// Group-averaged sliding-window variance over time for one (task, signal,
/// eye): each labeled recording contributes its variance series, averaged
/// per group at each window center.
pub fn group_variance_series(
    index: &SessionIndex,
    task: Task,
    signal: Signal,
    eye: Eye,
    window_s: f64,
    stride_s: f64,
) -> Vec<SeriesPoint> {
    // key = window-center time bits; identical window arithmetic across
    // recordings yields identical centers
    let mut acc: HashMap<(u64, bool), (f64, usize)> = HashMap::new();
    for &ri in &index.recordings_for_task(task) {
        let rec = &index.recordings[ri];
        let Some(label) = index.label_of(&rec.participant_id) else { continue };
        let Ok(series) = variance_series(rec, signal, eye, window_s, stride_s) else { continue };
        for p in series {
            let slot = acc.entry((p.time_s.to_bits(), label)).or_insert((0.0, 0));
            slot.0 += p.variance;
            slot.1 += 1;
        }
    }
    let mut points: Vec<SeriesPoint> = acc
        .into_iter()
        .map(|((bits, label), (sum, n))| SeriesPoint {
            time_s: f64::from_bits(bits),
            group: if label { Group::Fatigue } else { Group::NoFatigue },
            mean_variance: sum / n as f64,
            n,
        })
        .collect();
    points.sort_by(|a, b| {
        a.time_s.total_cmp(&b.time_s).then_with(|| (a.group == Group::Fatigue).cmp(&(b.group == Group::Fatigue)))
    });
    points
}

/// Renders a variance-over-time series as plot-ready CSV.
pub fn render_series_csv(points: &[SeriesPoint]) -> String {
    let mut out = String::from("time_s,variance,group,n\n");
    for p in points {
        out.push_str(&format!(
            "{:.3},{:.6e},{},{}\n",
            p.time_s, p.mean_variance, p.group, p.n
        ));
    }
    out
}

/// Everything `write_report` produced, plus warnings for degraded cells.
#[derive(Debug, Default)]
pub struct ReportSummary {
    pub tables_written: usize,
    pub roc_files_written: usize,
    pub missing_cells: usize,
    pub warnings: Vec<String>,
}

/// Renders the full report from a grid-results directory into `out_dir`:
/// `accuracy_<TASK>.md` / `accuracy_<TASK>.csv` per task and
/// `roc/<TASK>_<MODEL>_<N>s.csv` per cell whose detail file exists.
/// Missing cells render blank and produce warnings; they never abort the
/// report.
pub fn write_report(results_dir: &Path, out_dir: &Path) -> Result<ReportSummary, ReportError> {
    let rows = load_results_csv(&results_dir.join("results.csv"))?;
    std::fs::create_dir_all(out_dir)?;
    let mut summary = ReportSummary::default();

    for task in REPORT_TASK_ORDER {
        let table = task_table(task, &rows);
        for (model, w) in &table.missing {
            summary.warnings.push(format!("{task}/{model}/{w}s: no result row"));
        }
        summary.missing_cells += table.missing.len();
        std::fs::write(
            out_dir.join(format!("accuracy_{task}.md")),
            render_accuracy_markdown(&table),
        )?;
        std::fs::write(
            out_dir.join(format!("accuracy_{task}.csv")),
            render_accuracy_csv(&table),
        )?;
        summary.tables_written += 1;
    }

    let roc_dir = out_dir.join("roc");
    std::fs::create_dir_all(&roc_dir)?;
    for row in &rows {
        let key = CellKey { task: row.task, model: row.model, duration_s: row.window_s };
        let cell_path = results_dir.join("cells").join(key.file_name());
        let bytes = match std::fs::read(&cell_path) {
            Ok(b) => b,
            Err(_) => {
                summary
                    .warnings
                    .push(format!("{key}: cell detail file missing, ROC points not emitted"));
                continue;
            }
        };
        let cell: CellFile = serde_json::from_slice(&bytes).map_err(|e| ReportError::Parse {
            path: cell_path.display().to_string(),
            detail: e.to_string(),
        })?;
        let mut out = String::from("fpr,tpr\n");
        for (fpr, tpr) in &cell.result.roc_points {
            out.push_str(&format!("{fpr},{tpr}\n"));
        }
        let name = format!("{}_{}_{}s.csv", row.task, row.model, row.window_s);
        std::fs::write(roc_dir.join(name), out)?;
        summary.roc_files_written += 1;
    }
    Ok(summary)
}
