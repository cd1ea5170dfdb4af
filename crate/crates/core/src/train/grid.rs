//! Experiment grid runner: trains one model per (task, model, window-length)
//! cell, records results atomically, and resumes completed cells through a
//! config-hash manifest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use super::split::split_users;
use super::trainer::{evaluate, train, EvalResult};
use super::TrainError;
use crate::config::RunConfig;
use crate::ingest::{SessionIndex, Task};
use crate::nn::{build_model, ModelKind, ModelSpec};
use crate::preprocess::{
    apply_normalizer, fit_normalizer, make_windows, repair_gaps, Normalization, Window,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One grid cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub task: Task,
    pub model: ModelKind,
    pub duration_s: u32,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}s", self.task, self.model, self.duration_s)
    }
}

impl CellKey {
    pub fn file_name(&self) -> String {
        format!("{}_{}_{}s.json", self.task, self.model, self.duration_s)
    }
}

/// Cheap dataset identity: recording count, total samples, and a checksum
/// over per-recording summaries (participant, session, task, length, first
/// and last timestamps). Content edits inside a recording body can evade it;
/// it exists to catch swapped or regrown datasets between resumed runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub n_recordings: usize,
    pub total_samples: u64,
    pub checksum: String,
}

pub fn fingerprint_index(index: &SessionIndex) -> DatasetFingerprint {
    let mut summaries: Vec<String> = index
        .recordings
        .iter()
        .map(|r| {
            let first = r.samples.first().map(|s| s.n).unwrap_or(0.0);
            let last = r.samples.last().map(|s| s.n).unwrap_or(0.0);
            format!(
                "{}/{}/{}/{}/{first}/{last}",
                r.participant_id,
                r.session_id,
                r.task,
                r.samples.len()
            )
        })
        .collect();
    summaries.sort();
    let mut hasher = Sha256::new();
    for s in &summaries {
        hasher.update(s.as_bytes());
        hasher.update([0u8]);
    }
    DatasetFingerprint {
        n_recordings: index.recordings.len(),
        total_samples: index.recordings.iter().map(|r| r.samples.len() as u64).sum(),
        checksum: hasher.finalize().iter().map(|b| format!("{b:02x}")).collect(),
    }
}

/// Grid progress record. A manifest only ever references results produced
/// under its own config hash and dataset fingerprint; when either changes,
/// a fresh manifest replaces it and every cell is retrained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub dataset: DatasetFingerprint,
    /// Successfully completed cells (their result files exist).
    pub completed: BTreeSet<CellKey>,
    /// Cells whose last attempt failed, with the error message; retried on
    /// the next run.
    pub failed: BTreeMap<String, String>,
    pub tool_version: String,
    pub created_unix: u64,
    pub updated_unix: u64,
}

impl RunManifest {
    fn new(config_hash: String, dataset: DatasetFingerprint) -> Self {
        let now = unix_now();
        RunManifest {
            config_hash,
            dataset,
            completed: BTreeSet::new(),
            failed: BTreeMap::new(),
            tool_version: TOOL_VERSION.to_string(),
            created_unix: now,
            updated_unix: now,
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Everything persisted for one completed cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFile {
    pub result: EvalResult,
    pub loss_curve: Vec<f64>,
    pub train_participants: Vec<String>,
    pub test_participants: Vec<String>,
}

#[derive(Debug, Default)]
pub struct GridSummary {
    /// All completed results, resumed and fresh, in canonical cell order.
    pub results: Vec<EvalResult>,
    /// Cells trained during this invocation.
    pub trained: usize,
    /// Cells loaded from a compatible manifest without retraining.
    pub resumed: usize,
    pub failures: Vec<(CellKey, String)>,
}

/// Writes via a sibling temp file + rename so readers never observe a
/// partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Derives a role-specific seed from the run seed; distinct part lists give
/// distinct, platform-stable seeds.
pub fn derived_seed(base: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn save_manifest(path: &Path, manifest: &mut RunManifest) -> Result<(), TrainError> {
    manifest.updated_unix = unix_now();
    write_atomic(path, &serde_json::to_vec_pretty(manifest)?)?;
    Ok(())
}

struct TaskSplit {
    train_ids: Vec<String>,
    test_ids: Vec<String>,
}

/// Participants with metadata and at least one recording of `task`,
/// partitioned at the user level.
fn split_task_users(
    index: &SessionIndex,
    task: Task,
    cfg: &RunConfig,
) -> Result<TaskSplit, TrainError> {
    let mut ids: Vec<String> = Vec::new();
    let mut labels: Vec<bool> = Vec::new();
    for ((participant, t), recs) in &index.buckets {
        if *t != task || recs.is_empty() {
            continue;
        }
        if let Some(label) = index.label_of(participant) {
            ids.push(participant.clone());
            labels.push(label);
        }
    }
    if ids.is_empty() {
        return Err(TrainError::Input(format!("no labeled recordings for task {task}")));
    }
    let seed = derived_seed(cfg.train.seed, &["split", &task.to_string()]);
    let (train_ids, test_ids) =
        split_users(&ids, &labels, cfg.train.split_fraction, seed, cfg.train.stratify)?;
    Ok(TaskSplit { train_ids, test_ids })
}

/// Cuts, labels, and (optionally) normalizes the windows for one
/// (task, duration) pair, for both sides of the split. The normalizer is
/// fitted on training windows only.
fn build_cell_windows(
    index: &SessionIndex,
    task: Task,
    duration_s: u32,
    cfg: &RunConfig,
    split: &TaskSplit,
) -> Result<(Vec<Window>, Vec<Window>), TrainError> {
    let train_set: HashSet<&str> = split.train_ids.iter().map(|s| s.as_str()).collect();
    let test_set: HashSet<&str> = split.test_ids.iter().map(|s| s.as_str()).collect();
    let mut train_w = Vec::new();
    let mut test_w = Vec::new();
    for &ri in &index.recordings_for_task(task) {
        let rec = &index.recordings[ri];
        let side = if train_set.contains(rec.participant_id.as_str()) {
            &mut train_w
        } else if test_set.contains(rec.participant_id.as_str()) {
            &mut test_w
        } else {
            continue; // unlabeled participant
        };
        let meta = index
            .meta_by_participant
            .get(&rec.participant_id)
            .expect("split members have metadata");
        let repaired = repair_gaps(rec, &cfg.train.channels);
        side.extend(make_windows(&repaired, meta, duration_s, &cfg.train.channels)?);
    }
    if cfg.train.channels.normalization == Normalization::ZscoreTrainStats {
        if train_w.is_empty() {
            return Err(TrainError::EmptyTrainingSet);
        }
        let nrm = fit_normalizer(&train_w)?;
        for w in train_w.iter_mut().chain(test_w.iter_mut()) {
            *w = apply_normalizer(w, &nrm);
        }
    }
    Ok((train_w, test_w))
}

fn run_cell(
    key: CellKey,
    cfg: &RunConfig,
    config_hash: &str,
    train_w: &[Window],
    test_w: &[Window],
    split: &TaskSplit,
) -> Result<CellFile, TrainError> {
    // no-leakage assertion: split construction guarantees this, but every
    // result is re-checked before it is persisted
    let train_parts: HashSet<&str> = train_w.iter().map(|w| w.participant_id.as_str()).collect();
    let test_parts: HashSet<&str> = test_w.iter().map(|w| w.participant_id.as_str()).collect();
    assert!(
        train_parts.is_disjoint(&test_parts),
        "participant leakage in cell {key}"
    );

    let input_len = (key.duration_s as f64 * 250.0).round() as usize;
    let input_len = train_w
        .first()
        .map(|w| w.len())
        .unwrap_or(input_len);
    let seed = derived_seed(cfg.train.seed, &[
        "cell",
        &key.task.to_string(),
        &key.model.to_string(),
        &key.duration_s.to_string(),
    ]);
    let mut model = build_model(&ModelSpec::new(key.model, input_len, seed))?;
    let loss_curve = train(&mut model, train_w, &cfg.train)?;
    let mut result = evaluate(&mut model, test_w)?;
    result.config_hash = config_hash.to_string();
    Ok(CellFile {
        result,
        loss_curve,
        train_participants: split.train_ids.clone(),
        test_participants: split.test_ids.clone(),
    })
}

/// Rewrites the cell-summary CSV from every completed result.
fn write_results_csv(path: &Path, results: &[EvalResult]) -> Result<(), TrainError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "task",
            "model",
            "window_s",
            "accuracy",
            "auc",
            "n_test",
            "seed",
            "participant_accuracy",
        ])
        .map_err(|e| TrainError::Input(e.to_string()))?;
    for r in results {
        writer
            .write_record([
                r.task.to_string(),
                r.model.to_string(),
                r.duration_s.to_string(),
                format!("{:.6}", r.accuracy),
                format!("{:.6}", r.auc),
                r.n_test_windows.to_string(),
                r.seed.to_string(),
                format!("{:.6}", r.participant_accuracy),
            ])
            .map_err(|e| TrainError::Input(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| TrainError::Input(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

/// Runs every selected grid cell, skipping cells already completed under the
/// same config hash and dataset fingerprint. Cell failures are recorded in
/// the manifest and summary while the remaining cells continue. Artifacts in
/// `cfg.results_dir`: `manifest.json`, `cells/<task>_<model>_<dur>s.json`
/// (result + loss curve), and `results.csv` (one row per completed cell).
pub fn run_grid(index: &SessionIndex, cfg: &RunConfig) -> Result<GridSummary, TrainError> {
    cfg.validate().map_err(|e| TrainError::Input(e.to_string()))?;
    let config_hash = cfg.config_hash();
    let fingerprint = fingerprint_index(index);
    let cells_dir = cfg.results_dir.join("cells");
    fs::create_dir_all(&cells_dir)?;
    let manifest_path = cfg.results_dir.join("manifest.json");

    let mut manifest = match fs::read(&manifest_path) {
        Ok(bytes) => match serde_json::from_slice::<RunManifest>(&bytes) {
            Ok(m) if m.config_hash == config_hash && m.dataset == fingerprint => m,
            _ => RunManifest::new(config_hash.clone(), fingerprint.clone()),
        },
        Err(_) => RunManifest::new(config_hash.clone(), fingerprint.clone()),
    };
    manifest.failed.clear();

    let mut summary = GridSummary::default();

    for &task in &cfg.grid.tasks {
        let split = match split_task_users(index, task, cfg) {
            Ok(s) => s,
            Err(e) => {
                // the whole task is unusable; record every selected cell
                for &model in &cfg.grid.models {
                    for &duration_s in &cfg.grid.durations_s {
                        let key = CellKey { task, model, duration_s };
                        manifest.failed.insert(key.to_string(), e.to_string());
                        summary.failures.push((key, e.to_string()));
                    }
                }
                save_manifest(&manifest_path, &mut manifest)?;
                continue;
            }
        };
        for &duration_s in &cfg.grid.durations_s {
            let pending: Vec<ModelKind> = cfg
                .grid
                .models
                .iter()
                .copied()
                .filter(|&model| {
                    let key = CellKey { task, model, duration_s };
                    if !manifest.completed.contains(&key) {
                        return true;
                    }
                    // resumable only if the artifact is intact and stamped
                    // with this run's config hash
                    match fs::read(cells_dir.join(key.file_name()))
                        .ok()
                        .and_then(|b| serde_json::from_slice::<CellFile>(&b).ok())
                    {
                        Some(cell) if cell.result.config_hash == config_hash => {
                            summary.results.push(cell.result);
                            summary.resumed += 1;
                            false
                        }
                        _ => true,
                    }
                })
                .collect();
            if pending.is_empty() {
                continue;
            }
            let windows = build_cell_windows(index, task, duration_s, cfg, &split);
            // cells are independent given the shared split and windows, so a
            // worker pool changes wall time only, never results
            let workers = cfg.effective_workers().max(1);
            for chunk in pending.chunks(workers) {
                let outcomes: Vec<(CellKey, Result<CellFile, String>)> = match &windows {
                    Err(e) => chunk
                        .iter()
                        .map(|&model| (CellKey { task, model, duration_s }, Err(e.to_string())))
                        .collect(),
                    Ok((tr, te)) => {
                        let hash = config_hash.as_str();
                        let split_ref = &split;
                        std::thread::scope(|s| {
                            let handles: Vec<_> = chunk
                                .iter()
                                .map(|&model| {
                                    let key = CellKey { task, model, duration_s };
                                    s.spawn(move || {
                                        let cell = run_cell(key, cfg, hash, tr, te, split_ref)
                                            .map_err(|e| e.to_string());
                                        (key, cell)
                                    })
                                })
                                .collect();
                            handles
                                .into_iter()
                                .map(|h| h.join().expect("cell worker panicked"))
                                .collect()
                        })
                    }
                };
                for (key, outcome) in outcomes {
                    match outcome {
                        Ok(cell) => {
                            write_atomic(
                                &cells_dir.join(key.file_name()),
                                &serde_json::to_vec_pretty(&cell)?,
                            )?;
                            manifest.completed.insert(key);
                            summary.results.push(cell.result);
                            summary.trained += 1;
                        }
                        Err(msg) => {
                            manifest.failed.insert(key.to_string(), msg.clone());
                            summary.failures.push((key, msg));
                        }
                    }
                }
                save_manifest(&manifest_path, &mut manifest)?;
            }
        }
    }

    summary
        .results
        .sort_by_key(|r| (r.task, r.model, r.duration_s));
    write_results_csv(&cfg.results_dir.join("results.csv"), &summary.results)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{index_sessions, GazeSample, Gender, Recording, SessionMeta, SubjectiveRatings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Tiny two-class corpus: fatigue participants drift, non-fatigue jitter.
    fn tiny_index(n_per_class: usize, tasks: &[Task], seconds: f64) -> SessionIndex {
        let mut recordings = Vec::new();
        let mut metas = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for label in [false, true] {
            for i in 0..n_per_class {
                let pid = format!("{}{i:02}", if label { "F" } else { "N" });
                metas.push(SessionMeta {
                    participant_id: pid.clone(),
                    session_id: "S1".into(),
                    age: None,
                    gender: Gender::Unspecified,
                    fatigue_label: label,
                    hours_slept: None,
                    subjective: SubjectiveRatings::default(),
                });
                for &task in tasks {
                    let n = (seconds * 250.0) as usize;
                    let samples: Vec<GazeSample> = (0..n)
                        .map(|k| {
                            let t = k as f64 * 4.0;
                            let base = if label {
                                2.0 + 0.002 * k as f64
                            } else {
                                0.3 * (rng.gen::<f64>() - 0.5)
                            };
                            let mut s = GazeSample::empty(t);
                            s.x = Some(base);
                            s.y = Some(-base * 0.5);
                            s
                        })
                        .collect();
                    recordings.push(Recording {
                        participant_id: pid.clone(),
                        session_id: "S1".into(),
                        task,
                        sample_rate_hz: 250.0,
                        samples,
                    });
                }
            }
        }
        index_sessions(recordings, &metas)
    }

    fn fast_cfg(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.results_dir = dir.to_path_buf();
        cfg.train.epochs = 2;
        cfg.train.batch_size = 16;
        cfg.grid.tasks = vec![Task::PUR];
        cfg.grid.models = vec![ModelKind::TLENET, ModelKind::MCDCNN];
        cfg.grid.durations_s = vec![5];
        cfg
    }

    #[test]
    fn grid_produces_one_result_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let index = tiny_index(3, &[Task::PUR], 10.0);
        let cfg = fast_cfg(dir.path());
        let summary = run_grid(&index, &cfg).unwrap();
        assert_eq!(summary.trained, 2);
        assert_eq!(summary.resumed, 0);
        assert!(summary.failures.is_empty(), "{:?}", summary.failures);
        assert_eq!(summary.results.len(), 2);
        for r in &summary.results {
            assert_eq!(r.task, Task::PUR);
            assert_eq!(r.duration_s, 5);
            assert_eq!(r.config_hash, cfg.config_hash());
            assert!(r.n_test_windows > 0);
        }
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("results.csv").exists());
        assert!(dir.path().join("cells/PUR_TLENET_5s.json").exists());
    }

    #[test]
    fn rerun_resumes_completed_cells() {
        let dir = tempfile::tempdir().unwrap();
        let index = tiny_index(3, &[Task::PUR], 10.0);
        let cfg = fast_cfg(dir.path());
        let first = run_grid(&index, &cfg).unwrap();
        assert_eq!(first.trained, 2);
        let second = run_grid(&index, &cfg).unwrap();
        assert_eq!(second.trained, 0);
        assert_eq!(second.resumed, 2);
        assert_eq!(second.results.len(), 2);
        // resumed results are the persisted ones
        assert_eq!(first.results, second.results);
    }

    #[test]
    fn restricted_run_seeds_a_full_run() {
        let dir = tempfile::tempdir().unwrap();
        let index = tiny_index(3, &[Task::PUR], 10.0);
        let mut cfg = fast_cfg(dir.path());
        cfg.grid.models = vec![ModelKind::TLENET];
        let first = run_grid(&index, &cfg).unwrap();
        assert_eq!(first.trained, 1);
        cfg.grid.models = vec![ModelKind::TLENET, ModelKind::MCDCNN];
        let second = run_grid(&index, &cfg).unwrap();
        assert_eq!(second.trained, 1, "only the new cell trains");
        assert_eq!(second.resumed, 1);
    }

    #[test]
    fn changed_config_hash_invalidates_results() {
        let dir = tempfile::tempdir().unwrap();
        let index = tiny_index(3, &[Task::PUR], 10.0);
        let cfg = fast_cfg(dir.path());
        run_grid(&index, &cfg).unwrap();
        let mut changed = cfg.clone();
        changed.train.seed += 1;
        let second = run_grid(&index, &changed).unwrap();
        assert_eq!(second.trained, 2, "new hash retrains everything");
        assert_eq!(second.resumed, 0);
    }

    #[test]
    fn changed_dataset_invalidates_results() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fast_cfg(dir.path());
        let index = tiny_index(3, &[Task::PUR], 10.0);
        run_grid(&index, &cfg).unwrap();
        let grown = tiny_index(4, &[Task::PUR], 10.0);
        let second = run_grid(&grown, &cfg).unwrap();
        assert_eq!(second.trained, 2);
        assert_eq!(second.resumed, 0);
    }

    #[test]
    fn missing_task_is_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let index = tiny_index(3, &[Task::PUR], 10.0);
        let mut cfg = fast_cfg(dir.path());
        cfg.grid.tasks = vec![Task::PUR, Task::TEX]; // TEX has no recordings
        let summary = run_grid(&index, &cfg).unwrap();
        assert_eq!(summary.trained, 2);
        assert_eq!(summary.failures.len(), 2, "both TEX cells fail");
        for (key, msg) in &summary.failures {
            assert_eq!(key.task, Task::TEX);
            assert!(msg.contains("no labeled recordings"), "{msg}");
        }
    }

    #[test]
    fn split_is_stable_per_task_across_cells() {
        let dir = tempfile::tempdir().unwrap();
        let index = tiny_index(3, &[Task::PUR], 10.0);
        let cfg = fast_cfg(dir.path());
        run_grid(&index, &cfg).unwrap();
        let load = |name: &str| -> CellFile {
            serde_json::from_slice(&fs::read(dir.path().join("cells").join(name)).unwrap())
                .unwrap()
        };
        let a = load("PUR_TLENET_5s.json");
        let b = load("PUR_MCDCNN_5s.json");
        assert_eq!(a.train_participants, b.train_participants);
        assert_eq!(a.test_participants, b.test_participants);
        let train: HashSet<_> = a.train_participants.iter().collect();
        let test: HashSet<_> = a.test_participants.iter().collect();
        assert!(train.is_disjoint(&test));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let index = tiny_index(3, &[Task::PUR], 10.0);
        let dir_a = tempfile::tempdir().unwrap();
        let mut cfg_a = fast_cfg(dir_a.path());
        cfg_a.workers = 1;
        let dir_b = tempfile::tempdir().unwrap();
        let mut cfg_b = fast_cfg(dir_b.path());
        cfg_b.workers = 2;
        let a = run_grid(&index, &cfg_a).unwrap();
        let b = run_grid(&index, &cfg_b).unwrap();
        assert_eq!(a.results, b.results);
        assert_eq!(a.trained, 2);
        assert_eq!(b.trained, 2);
    }

    #[test]
    fn fingerprint_tracks_content_identity() {
        let a = tiny_index(3, &[Task::PUR], 10.0);
        let b = tiny_index(3, &[Task::PUR], 10.0);
        assert_eq!(fingerprint_index(&a), fingerprint_index(&b));
        let c = tiny_index(3, &[Task::PUR, Task::VID], 10.0);
        assert_ne!(fingerprint_index(&a).checksum, fingerprint_index(&c).checksum);
    }
}
