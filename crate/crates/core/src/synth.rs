//! Synthetic two-class gaze corpus generator.
//!
//! Produces gaze-like recordings in the same shape as the real dataset so
//! the whole pipeline (ingest → windows → training → statistics) can run
//! end-to-end without the licensed data. The two classes differ the way the
//! detection task assumes fatigue manifests:
//!
//! - the fatigued class gains a low-frequency gaze drift, and
//! - its sample-to-sample velocity noise is scaled by 1.5×.
//!
//! Everything is deterministic in the corpus seed; per-participant streams
//! are derived independently so changing the cohort size does not reshuffle
//! existing participants.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{
    ColumnSchema, GazeSample, IngestError, Measure, PrePost, Recording, SessionMeta,
    SubjectiveRatings, Task,
};
use crate::train::derived_seed;

/// Velocity-noise multiplier of the fatigued class.
pub const FATIGUE_NOISE_FACTOR: f64 = 1.5;

/// Corpus layout: participant count, recording length, tasks, and seed.
/// Participants alternate labels (even index → non-fatigued), so any prefix
/// of the cohort stays balanced.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_participants: usize,
    pub recording_s: f64,
    pub sample_rate_hz: f64,
    pub tasks: Vec<Task>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_participants: 40,
            recording_s: 15.0,
            sample_rate_hz: 250.0,
            tasks: Task::ALL.to_vec(),
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// Participant id of cohort index `i`; numbered from 9001 to stay clear
    /// of real-dataset id ranges.
    pub fn participant_id(&self, i: usize) -> String {
        format!("{}", 9001 + i)
    }

    fn label(&self, i: usize) -> bool {
        i % 2 == 1
    }
}

/// Standard normal via Box–Muller.
fn randn(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Per-participant signal temperament, drawn once from the participant's
/// own stream.
struct Temperament {
    noise_scale: f64,
    path_amp_x: f64,
    path_amp_y: f64,
    path_freq_hz: f64,
    drift_amp: f64,
    drift_freq_hz: f64,
    vergence_dva: f64,
}

impl Temperament {
    fn draw(rng: &mut ChaCha8Rng) -> Temperament {
        Temperament {
            noise_scale: rng.gen_range(0.85..1.15),
            path_amp_x: rng.gen_range(3.0..8.0),
            path_amp_y: rng.gen_range(2.0..5.0),
            path_freq_hz: rng.gen_range(0.2..0.5),
            drift_amp: rng.gen_range(2.0..3.5),
            drift_freq_hz: rng.gen_range(0.05..0.15),
            vergence_dva: rng.gen_range(0.3..0.8),
        }
    }
}

/// Baseline sample-to-sample angular noise, dva. The fatigued class uses
/// this × [`FATIGUE_NOISE_FACTOR`] (before the participant's own ±15%).
const BASE_NOISE_DVA: f64 = 0.25;

/// Generates one recording for (participant index, task).
fn synth_recording(cfg: &SynthConfig, idx: usize, task: Task) -> Recording {
    let pid = cfg.participant_id(idx);
    let fatigued = cfg.label(idx);
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(
        cfg.seed,
        &["synth", &pid, &task.to_string()],
    ));
    let temperament = Temperament::draw(&mut rng);

    let n_samples = (cfg.recording_s * cfg.sample_rate_hz).round() as usize;
    let dt_ms = 1000.0 / cfg.sample_rate_hz;
    let sigma = BASE_NOISE_DVA
        * temperament.noise_scale
        * if fatigued { FATIGUE_NOISE_FACTOR } else { 1.0 };

    // task-flavored deterministic gaze path
    let (phase_x, phase_y) = (rng.gen_range(0.0..6.28), rng.gen_range(0.0..6.28));
    let drift_phase = rng.gen_range(0.0..6.28);
    let path = |t: f64| -> (f64, f64) {
        let w = 2.0 * std::f64::consts::PI * temperament.path_freq_hz;
        match task {
            // smooth pursuit: continuous sinusoidal sweep
            Task::PUR => (
                temperament.path_amp_x * (w * t + phase_x).sin(),
                temperament.path_amp_y * (w * t * 0.7 + phase_y).sin(),
            ),
            // video/text: slow meander at reduced amplitude
            Task::VID | Task::TEX => (
                0.6 * temperament.path_amp_x * (w * 0.5 * t + phase_x).sin(),
                0.4 * temperament.path_amp_y * (w * 0.4 * t + phase_y).cos(),
            ),
            // vergence/random saccades: step pattern between fixation points
            Task::VRG | Task::RAN => {
                let step = (t * 1.25).floor();
                (
                    temperament.path_amp_x * ((step * 2.39996 + phase_x).sin()),
                    temperament.path_amp_y * ((step * 1.79996 + phase_y).cos()),
                )
            }
        }
    };

    let eye_half_gap_m = 0.032;
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 / cfg.sample_rate_hz;
        let (px, py) = path(t);
        let drift = if fatigued {
            let wd = 2.0 * std::f64::consts::PI * temperament.drift_freq_hz;
            temperament.drift_amp * (wd * t + drift_phase).sin()
        } else {
            0.0
        };
        let x = px + drift + sigma * randn(&mut rng);
        let y = py + 0.6 * drift + sigma * randn(&mut rng);
        let eye_noise = 0.05;
        let lx = x - temperament.vergence_dva / 2.0 + eye_noise * randn(&mut rng);
        let rx = x + temperament.vergence_dva / 2.0 + eye_noise * randn(&mut rng);
        let ly = y + eye_noise * randn(&mut rng);
        let ry = y + eye_noise * randn(&mut rng);

        let mut s = GazeSample::empty(i as f64 * dt_ms);
        s.x = Some(x);
        s.y = Some(y);
        s.lx = Some(lx);
        s.ly = Some(ly);
        s.rx = Some(rx);
        s.ry = Some(ry);
        let head_jitter = 0.001;
        s.pos_l = Some([
            -eye_half_gap_m + head_jitter * randn(&mut rng),
            head_jitter * randn(&mut rng),
            head_jitter * randn(&mut rng),
        ]);
        s.pos_r = Some([
            eye_half_gap_m + head_jitter * randn(&mut rng),
            head_jitter * randn(&mut rng),
            head_jitter * randn(&mut rng),
        ]);
        samples.push(s);
    }

    Recording {
        participant_id: pid,
        session_id: "S1".to_string(),
        task,
        sample_rate_hz: cfg.sample_rate_hz,
        samples,
    }
}

/// Draws a rating in the measure's documented range, shifted upward for the
/// fatigued group and from pre to post session.
fn rating(rng: &mut ChaCha8Rng, measure: Measure, fatigued: bool) -> PrePost {
    let (lo, hi) = measure.range();
    let group_shift = if fatigued { 0.7 } else { 0.0 };
    let pre = (lo + 1.0 + group_shift + 0.8 * randn(rng)).round().clamp(lo, hi);
    let session_shift = if fatigued { 0.8 } else { 0.3 };
    let post = (pre + session_shift + 0.7 * randn(rng)).round().clamp(lo, hi);
    PrePost { pre: Some(pre), post: Some(post) }
}

/// Generates the metadata row of cohort index `idx`.
fn synth_meta(cfg: &SynthConfig, idx: usize) -> SessionMeta {
    let pid = cfg.participant_id(idx);
    let fatigued = cfg.label(idx);
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(cfg.seed, &["synth-meta", &pid]));
    let hours_mean = if fatigued { 6.83 } else { 7.32 };
    let mut subjective = SubjectiveRatings::default();
    for m in Measure::ALL {
        *match m {
            Measure::Sleepiness => &mut subjective.sleepiness,
            Measure::NeckFatigue => &mut subjective.neck_fatigue,
            Measure::PhysicalComfort => &mut subjective.physical_comfort,
            Measure::MentalEffort => &mut subjective.mental_effort,
            Measure::PhysicalEffort => &mut subjective.physical_effort,
        } = rating(&mut rng, m, fatigued);
    }
    SessionMeta {
        participant_id: pid,
        session_id: "S1".to_string(),
        age: Some((22.0 + rng.gen_range(0.0..20.0_f64)).round()),
        gender: crate::ingest::Gender::Unspecified,
        fatigue_label: fatigued,
        hours_slept: Some(((hours_mean + 0.8 * randn(&mut rng)) * 100.0).round() / 100.0),
        subjective,
    }
}

/// Generates the full corpus in memory: one recording per (participant,
/// task) plus one metadata row per participant.
pub fn synth_corpus(cfg: &SynthConfig) -> (Vec<Recording>, Vec<SessionMeta>) {
    let mut recordings = Vec::with_capacity(cfg.n_participants * cfg.tasks.len());
    let mut metas = Vec::with_capacity(cfg.n_participants);
    for idx in 0..cfg.n_participants {
        metas.push(synth_meta(cfg, idx));
        for &task in &cfg.tasks {
            recordings.push(synth_recording(cfg, idx, task));
        }
    }
    (recordings, metas)
}

/// Column schema of written synthetic corpora: the default dataset columns
/// plus per-eye position triples; no gaze-direction columns.
pub fn synth_schema() -> ColumnSchema {
    ColumnSchema { dir_l: None, dir_r: None, ..ColumnSchema::default() }
}

/// Writes the corpus as a loadable dataset directory:
/// `S_<participant>_<session>_<task>.csv` per recording plus `metadata.csv`.
/// Returns the written recording file names in order.
pub fn write_synth_corpus(dir: &Path, cfg: &SynthConfig) -> Result<Vec<String>, IngestError> {
    std::fs::create_dir_all(dir)?;
    let schema = synth_schema();
    let (recordings, metas) = synth_corpus(cfg);

    let mut names = Vec::with_capacity(recordings.len());
    for rec in &recordings {
        let name = format!("S_{}_{}_{}.csv", rec.participant_id, rec.session_id, rec.task);
        crate::ingest::write_recording_csv(rec, &dir.join(&name), &schema)?;
        names.push(name);
    }

    let mut writer = csv::Writer::from_path(dir.join("metadata.csv"))?;
    let mut header = vec![
        "participant_id".to_string(),
        "session_id".to_string(),
        "age".to_string(),
        "fatigue".to_string(),
        "hours_slept".to_string(),
    ];
    for m in Measure::ALL {
        header.push(format!("{}_pre", m.column_stem()));
        header.push(format!("{}_post", m.column_stem()));
    }
    writer.write_record(&header)?;
    for meta in &metas {
        let mut row = vec![
            meta.participant_id.clone(),
            meta.session_id.clone(),
            meta.age.map(|a| format!("{a}")).unwrap_or_default(),
            if meta.fatigue_label { "1".to_string() } else { "0".to_string() },
            meta.hours_slept.map(|h| format!("{h}")).unwrap_or_default(),
        ];
        for m in Measure::ALL {
            let pair = meta.subjective.get(m);
            row.push(pair.pre.map(|v| format!("{v}")).unwrap_or_default());
            row.push(pair.post.map(|v| format!("{v}")).unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(names)
}
