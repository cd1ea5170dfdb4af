//! Gaze-angle math, gap repair, windowing, normalization, and the window cache.
//!
//! The classifier input is a 4 × L matrix per window. Channel assembly is
//! driven by [`ChannelConfig::mode`]: either cyclopean angles plus their
//! velocities, or the four binocular angle channels. Gap repair linearly
//! interpolates short tracking dropouts; windows still containing missing
//! samples, or repaired beyond the configured fraction, are dropped.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{interp_mask, GazeSample, Recording, SessionMeta, Task};

/// A 3D gaze-direction vector; `z` is the forward axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GazeVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        GazeVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Which four channels feed the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Cyclopean horizontal/vertical angle plus their first-difference
    /// velocities (dva/s).
    CyclopeanPosVel,
    /// Left and right eye horizontal/vertical angles.
    Binocular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Z-score using statistics fitted on the training split only.
    ZscoreTrainStats,
    None,
}

/// Channel assembly and gap policy configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub mode: ChannelMode,
    pub normalization: Normalization,
    /// Gaps up to this duration are linearly interpolated.
    pub max_gap_interp_ms: f64,
    /// Windows whose repaired-or-missing fraction exceeds this are dropped.
    pub max_missing_fraction: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            mode: ChannelMode::CyclopeanPosVel,
            normalization: Normalization::ZscoreTrainStats,
            max_gap_interp_ms: 100.0,
            max_missing_fraction: 0.25,
        }
    }
}

impl ChannelConfig {
    pub const N_CHANNELS: usize = 4;

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(PreprocessError::BadConfig(format!(
                "max_missing_fraction {} outside [0, 1]",
                self.max_missing_fraction
            )));
        }
        if !self.max_gap_interp_ms.is_finite() || self.max_gap_interp_ms < 0.0 {
            return Err(PreprocessError::BadConfig(format!(
                "max_gap_interp_ms {} must be finite and non-negative",
                self.max_gap_interp_ms
            )));
        }
        Ok(())
    }
}

/// Allowed window durations in seconds.
pub const WINDOW_DURATIONS_S: [u32; 4] = [5, 10, 15, 20];

/// Fixed-length multichannel segment, the unit of classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub participant_id: String,
    pub task: Task,
    /// Fatigue label, copied from the participant's metadata.
    pub label: bool,
    /// Timestamp of the window's first sample.
    pub start_ms: f64,
    pub duration_s: u32,
    /// 4 × L, L = duration_s × sample rate; fully finite.
    pub data: Array2<f64>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("gaze vector has zero norm")]
    ZeroVector,
    #[error("window duration {0} s not one of {WINDOW_DURATIONS_S:?}")]
    BadDuration(u32),
    #[error("recording participant `{recording}` does not match metadata participant `{meta}`")]
    ParticipantMismatch { recording: String, meta: String },
    #[error("cannot fit a normalizer on an empty window set")]
    EmptyWindowSet,
    #[error("invalid channel config: {0}")]
    BadConfig(String),
    #[error("window cache format error: {0}")]
    CacheFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

const RAD_TO_DEG: f64 = 180.0 / std::f64::consts::PI;

/// Converts a 3D gaze direction to (horizontal, vertical) angles in dva:
/// θ_H = atan2(x, √(y²+z²)), θ_V = atan2(y, z), both scaled to degrees.
pub fn vector_to_angles(v: GazeVector) -> Result<(f64, f64), PreprocessError> {
    if v.norm() == 0.0 {
        return Err(PreprocessError::ZeroVector);
    }
    let theta_h = RAD_TO_DEG * v.x.atan2((v.y * v.y + v.z * v.z).sqrt());
    let theta_v = RAD_TO_DEG * v.y.atan2(v.z);
    Ok((theta_h, theta_v))
}

/// Inverse of [`vector_to_angles`] for |θ_H| < 90°: builds the unit vector
/// (sin h, cos h · sin v, cos h · cos v).
pub fn angles_to_vector(theta_h: f64, theta_v: f64) -> GazeVector {
    let h = theta_h / RAD_TO_DEG;
    let v = theta_v / RAD_TO_DEG;
    GazeVector::new(h.sin(), h.cos() * v.sin(), h.cos() * v.cos())
}

// Accessor pairs for the six repairable angle channels.
type ChannelAccess = (fn(&GazeSample) -> Option<f64>, fn(&mut GazeSample) -> &mut Option<f64>, u8);

const ANGLE_CHANNELS: [ChannelAccess; 6] = [
    (|s| s.x, |s| &mut s.x, interp_mask::X),
    (|s| s.y, |s| &mut s.y, interp_mask::Y),
    (|s| s.lx, |s| &mut s.lx, interp_mask::LX),
    (|s| s.ly, |s| &mut s.ly, interp_mask::LY),
    (|s| s.rx, |s| &mut s.rx, interp_mask::RX),
    (|s| s.ry, |s| &mut s.ry, interp_mask::RY),
];

/// Linearly interpolates missing runs of duration ≤ `cfg.max_gap_interp_ms`
/// per angle channel, marking filled samples in their `interpolated` mask.
/// Runs touching either end of the recording have no anchor and are kept
/// as-is. Gap duration excludes the nominal interval itself, so three missing
/// samples at 250 Hz form a 12 ms gap.
pub fn repair_gaps(rec: &Recording, cfg: &ChannelConfig) -> Recording {
    let mut out = rec.clone();
    let nominal = rec.nominal_interval_ms();
    let n = out.samples.len();
    for (get, set, mask) in ANGLE_CHANNELS {
        let mut i = 0;
        while i < n {
            if get(&out.samples[i]).is_some() {
                i += 1;
                continue;
            }
            let run_start = i;
            while i < n && get(&out.samples[i]).is_none() {
                i += 1;
            }
            let run_end = i; // exclusive
            if run_start == 0 || run_end == n {
                continue; // boundary gap: no anchor on one side
            }
            let left = run_start - 1;
            let right = run_end;
            let t_left = out.samples[left].n;
            let t_right = out.samples[right].n;
            let gap_ms = t_right - t_left - nominal;
            if gap_ms > cfg.max_gap_interp_ms {
                continue;
            }
            let v_left = get(&out.samples[left]).unwrap();
            let v_right = get(&out.samples[right]).unwrap();
            for k in run_start..run_end {
                let t = out.samples[k].n;
                let alpha = (t - t_left) / (t_right - t_left);
                *set(&mut out.samples[k]) = Some(v_left + alpha * (v_right - v_left));
                out.samples[k].interpolated |= mask;
            }
        }
    }
    out
}

fn mode_channels(mode: ChannelMode) -> (&'static [fn(&GazeSample) -> Option<f64>], u8) {
    match mode {
        ChannelMode::CyclopeanPosVel => {
            const GET: [fn(&GazeSample) -> Option<f64>; 2] = [|s| s.x, |s| s.y];
            (&GET, interp_mask::X | interp_mask::Y)
        }
        ChannelMode::Binocular => {
            const GET: [fn(&GazeSample) -> Option<f64>; 4] =
                [|s| s.lx, |s| s.ly, |s| s.rx, |s| s.ry];
            (&GET, interp_mask::LX | interp_mask::LY | interp_mask::RX | interp_mask::RY)
        }
    }
}

/// Cuts non-overlapping windows of `duration_s` from the start of a repaired
/// recording. A window is dropped when any required sample is still missing,
/// or when the repaired fraction exceeds `cfg.max_missing_fraction`; the
/// trailing partial window is always dropped. In `CyclopeanPosVel` mode the
/// velocity channels are first differences × sample rate with the first
/// velocity sample duplicated, so every window keeps exactly L columns.
pub fn make_windows(
    rec: &Recording,
    meta: &SessionMeta,
    duration_s: u32,
    cfg: &ChannelConfig,
) -> Result<Vec<Window>, PreprocessError> {
    cfg.validate()?;
    if !WINDOW_DURATIONS_S.contains(&duration_s) {
        return Err(PreprocessError::BadDuration(duration_s));
    }
    if rec.participant_id != meta.participant_id {
        return Err(PreprocessError::ParticipantMismatch {
            recording: rec.participant_id.clone(),
            meta: meta.participant_id.clone(),
        });
    }
    let len = (duration_s as f64 * rec.sample_rate_hz).round() as usize;
    let n_windows = rec.samples.len() / len;
    let (getters, mask) = mode_channels(cfg.mode);
    let mut windows = Vec::with_capacity(n_windows);

    'next_window: for w in 0..n_windows {
        let span = &rec.samples[w * len..(w + 1) * len];
        let mut repaired = 0usize;
        for s in span {
            if getters.iter().any(|get| get(s).is_none()) {
                continue 'next_window; // unrepaired gap: unusable
            }
            if s.interpolated & mask != 0 {
                repaired += 1;
            }
        }
        if repaired as f64 / len as f64 > cfg.max_missing_fraction {
            continue;
        }
        let mut data = Array2::<f64>::zeros((ChannelConfig::N_CHANNELS, len));
        match cfg.mode {
            ChannelMode::CyclopeanPosVel => {
                for (t, s) in span.iter().enumerate() {
                    data[[0, t]] = s.x.unwrap();
                    data[[1, t]] = s.y.unwrap();
                }
                for ch in 0..2 {
                    for t in 1..len {
                        data[[2 + ch, t]] =
                            (data[[ch, t]] - data[[ch, t - 1]]) * rec.sample_rate_hz;
                    }
                    data[[2 + ch, 0]] = if len > 1 { data[[2 + ch, 1]] } else { 0.0 };
                }
            }
            ChannelMode::Binocular => {
                for (t, s) in span.iter().enumerate() {
                    for (ch, get) in getters.iter().enumerate() {
                        data[[ch, t]] = get(s).unwrap();
                    }
                }
            }
        }
        windows.push(Window {
            participant_id: rec.participant_id.clone(),
            task: rec.task,
            label: meta.fatigue_label,
            start_ms: span[0].n,
            duration_s,
            data,
        });
    }
    Ok(windows)
}

/// Per-channel z-score statistics fitted on training windows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; 4],
    /// Population standard deviation, floored at 1e-8.
    pub std: [f64; 4],
}

/// Fits per-channel mean/std over every sample of every training window.
pub fn fit_normalizer(train_windows: &[Window]) -> Result<Normalizer, PreprocessError> {
    if train_windows.is_empty() {
        return Err(PreprocessError::EmptyWindowSet);
    }
    let mut mean = [0.0f64; 4];
    let mut m2 = [0.0f64; 4];
    let mut count = 0u64;
    for w in train_windows {
        for t in 0..w.len() {
            count += 1;
            for ch in 0..4 {
                let v = w.data[[ch, t]];
                let delta = v - mean[ch];
                mean[ch] += delta / count as f64;
                m2[ch] += delta * (v - mean[ch]);
            }
        }
    }
    let mut std = [0.0f64; 4];
    for ch in 0..4 {
        std[ch] = (m2[ch] / count as f64).sqrt().max(1e-8);
    }
    Ok(Normalizer { mean, std })
}

/// Returns a normalized copy: (v − mean) / std per channel.
pub fn apply_normalizer(w: &Window, nrm: &Normalizer) -> Window {
    let mut out = w.clone();
    for ch in 0..4 {
        for t in 0..out.len() {
            out.data[[ch, t]] = (out.data[[ch, t]] - nrm.mean[ch]) / nrm.std[ch];
        }
    }
    out
}

/// Payload precision of the window cache and model checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(&self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

const CACHE_MAGIC: &[u8; 8] = b"VRFWC01\n";

/// Self-describing header of a window-cache file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheHeader {
    pub config_hash: String,
    pub dtype: Dtype,
    pub channels: usize,
    pub len: usize,
    pub duration_s: u32,
    pub n_windows: usize,
}

fn task_code(task: Task) -> u8 {
    match task {
        Task::VRG => 0,
        Task::PUR => 1,
        Task::VID => 2,
        Task::TEX => 3,
        Task::RAN => 4,
    }
}

fn task_from_code(code: u8) -> Result<Task, PreprocessError> {
    Ok(match code {
        0 => Task::VRG,
        1 => Task::PUR,
        2 => Task::VID,
        3 => Task::TEX,
        4 => Task::RAN,
        other => {
            return Err(PreprocessError::CacheFormat(format!("unknown task code {other}")));
        }
    })
}

fn write_payload<W: Write>(out: &mut W, row: ArrayView1<'_, f64>, dtype: Dtype) -> std::io::Result<()> {
    match dtype {
        Dtype::F64 => {
            for &v in row {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Dtype::F32 => {
            for &v in row {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Writes windows to the binary cache.
///
/// Layout: 8-byte magic `VRFWC01\n`, u32-LE header length, JSON
/// [`CacheHeader`], then per window: u32-LE participant-id length, id bytes,
/// task code (u8), label (u8), start_ms (f64 LE), and channels × len payload
/// values (row-major by channel, little-endian, f32 or f64 per header).
pub fn write_window_cache(
    path: &Path,
    windows: &[Window],
    config_hash: &str,
    dtype: Dtype,
) -> Result<(), PreprocessError> {
    if windows.is_empty() {
        return Err(PreprocessError::EmptyWindowSet);
    }
    let len = windows[0].len();
    let duration_s = windows[0].duration_s;
    if windows.iter().any(|w| w.len() != len || w.duration_s != duration_s) {
        return Err(PreprocessError::CacheFormat(
            "all cached windows must share length and duration".into(),
        ));
    }
    let header = CacheHeader {
        config_hash: config_hash.to_string(),
        dtype,
        channels: ChannelConfig::N_CHANNELS,
        len,
        duration_s,
        n_windows: windows.len(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&(header_json.len() as u32).to_le_bytes())?;
    out.write_all(&header_json)?;
    for w in windows {
        let id = w.participant_id.as_bytes();
        out.write_all(&(id.len() as u32).to_le_bytes())?;
        out.write_all(id)?;
        out.write_all(&[task_code(w.task), w.label as u8])?;
        out.write_all(&w.start_ms.to_le_bytes())?;
        for ch in 0..w.data.nrows() {
            write_payload(&mut out, w.data.row(ch), dtype)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a window cache written by [`write_window_cache`]. f32 payloads are
/// widened to f64.
pub fn read_window_cache(path: &Path) -> Result<(Vec<Window>, CacheHeader), PreprocessError> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(PreprocessError::CacheFormat("bad magic".into()));
    }
    let mut len_buf = [0u8; 4];
    input.read_exact(&mut len_buf)?;
    let header_len = u32::from_le_bytes(len_buf) as usize;
    let mut header_json = vec![0u8; header_len];
    input.read_exact(&mut header_json)?;
    let header: CacheHeader = serde_json::from_slice(&header_json)?;

    let mut windows = Vec::with_capacity(header.n_windows);
    for _ in 0..header.n_windows {
        input.read_exact(&mut len_buf)?;
        let id_len = u32::from_le_bytes(len_buf) as usize;
        let mut id = vec![0u8; id_len];
        input.read_exact(&mut id)?;
        let participant_id = String::from_utf8(id)
            .map_err(|e| PreprocessError::CacheFormat(e.to_string()))?;
        let mut two = [0u8; 2];
        input.read_exact(&mut two)?;
        let task = task_from_code(two[0])?;
        let label = two[1] != 0;
        let mut f64_buf = [0u8; 8];
        input.read_exact(&mut f64_buf)?;
        let start_ms = f64::from_le_bytes(f64_buf);
        let mut data = Array2::<f64>::zeros((header.channels, header.len));
        match header.dtype {
            Dtype::F64 => {
                for ch in 0..header.channels {
                    for t in 0..header.len {
                        input.read_exact(&mut f64_buf)?;
                        data[[ch, t]] = f64::from_le_bytes(f64_buf);
                    }
                }
            }
            Dtype::F32 => {
                let mut f32_buf = [0u8; 4];
                for ch in 0..header.channels {
                    for t in 0..header.len {
                        input.read_exact(&mut f32_buf)?;
                        data[[ch, t]] = f32::from_le_bytes(f32_buf) as f64;
                    }
                }
            }
        }
        windows.push(Window {
            participant_id,
            task,
            label,
            start_ms,
            duration_s: header.duration_s,
            data,
        });
    }
    Ok((windows, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Gender, SubjectiveRatings};
    use approx::assert_relative_eq;

    fn meta(pid: &str, fatigue: bool) -> SessionMeta {
        SessionMeta {
            participant_id: pid.into(),
            session_id: "S1".into(),
            age: None,
            gender: Gender::Unspecified,
            fatigue_label: fatigue,
            hours_slept: None,
            subjective: SubjectiveRatings::default(),
        }
    }

    fn recording(pid: &str, n_samples: usize, value: impl Fn(usize) -> (f64, f64)) -> Recording {
        let samples = (0..n_samples)
            .map(|i| {
                let (x, y) = value(i);
                GazeSample {
                    x: Some(x),
                    y: Some(y),
                    lx: Some(x - 0.1),
                    ly: Some(y - 0.1),
                    rx: Some(x + 0.1),
                    ry: Some(y + 0.1),
                    ..GazeSample::empty(4.0 * i as f64)
                }
            })
            .collect();
        Recording {
            participant_id: pid.into(),
            session_id: "S1".into(),
            task: Task::PUR,
            sample_rate_hz: 250.0,
            samples,
        }
    }

    #[test]
    fn forward_gaze_is_zero_angles() {
        let (h, v) = vector_to_angles(GazeVector::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(h, 0.0);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn unit_diagonal_is_45_degrees() {
        let (h, v) = vector_to_angles(GazeVector::new(1.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(h, 45.0, max_relative = 1e-12);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert!(matches!(
            vector_to_angles(GazeVector::new(0.0, 0.0, 0.0)),
            Err(PreprocessError::ZeroVector)
        ));
    }

    #[test]
    fn angle_round_trip_within_89_degrees() {
        for h10 in (-880..=880).step_by(80) {
            for v10 in (-880..=880).step_by(80) {
                let (h, v) = (h10 as f64 / 10.0, v10 as f64 / 10.0);
                let vec = angles_to_vector(h, v);
                let (h2, v2) = vector_to_angles(vec).unwrap();
                assert!((h - h2).abs() < 1e-9, "h {h} -> {h2}");
                assert!((v - v2).abs() < 1e-9, "v {v} -> {v2}");
            }
        }
    }

    #[test]
    fn short_gap_is_linearly_interpolated() {
        let mut rec = recording("p", 10, |i| (i as f64, 0.0));
        for i in 4..7 {
            rec.samples[i].x = None; // 3 missing samples = 12 ms gap
        }
        let cfg = ChannelConfig::default();
        let repaired = repair_gaps(&rec, &cfg);
        for i in 4..7 {
            assert_relative_eq!(repaired.samples[i].x.unwrap(), i as f64, max_relative = 1e-12);
            assert_eq!(repaired.samples[i].interpolated, interp_mask::X);
        }
        assert_eq!(repaired.samples[3].interpolated, 0);
    }

    #[test]
    fn long_gap_is_retained() {
        let mut rec = recording("p", 100, |i| (i as f64, 0.0));
        for i in 20..70 {
            rec.samples[i].x = None; // 50 missing samples = 200 ms
        }
        let repaired = repair_gaps(&rec, &ChannelConfig::default());
        assert!(repaired.samples[25].x.is_none());
    }

    #[test]
    fn boundary_gap_is_retained() {
        let mut rec = recording("p", 10, |i| (i as f64, 0.0));
        rec.samples[0].x = None;
        rec.samples[9].y = None;
        let repaired = repair_gaps(&rec, &ChannelConfig::default());
        assert!(repaired.samples[0].x.is_none());
        assert!(repaired.samples[9].y.is_none());
    }

    #[test]
    fn window_counts_match_floor_division() {
        let cfg = ChannelConfig::default();
        let m = meta("p", true);
        // 60 s at 250 Hz, duration 10 s -> 6 windows of 4x2500
        let rec = recording("p", 15000, |i| (i as f64 * 1e-3, 0.0));
        let ws = make_windows(&rec, &m, 10, &cfg).unwrap();
        assert_eq!(ws.len(), 6);
        assert_eq!(ws[0].data.dim(), (4, 2500));
        // 38 s recording, duration 20 s -> 1 window
        let rec = recording("p", 9500, |i| (i as f64 * 1e-3, 0.0));
        assert_eq!(make_windows(&rec, &m, 20, &cfg).unwrap().len(), 1);
        // 9.9 s recording, duration 10 s -> 0 windows
        let rec = recording("p", 2475, |i| (i as f64 * 1e-3, 0.0));
        assert_eq!(make_windows(&rec, &m, 10, &cfg).unwrap().len(), 0);
    }

    #[test]
    fn invalid_duration_is_rejected() {
        let rec = recording("p", 2500, |i| (i as f64, 0.0));
        let err = make_windows(&rec, &meta("p", false), 7, &ChannelConfig::default()).unwrap_err();
        assert!(matches!(err, PreprocessError::BadDuration(7)));
    }

    #[test]
    fn participant_mismatch_is_rejected() {
        let rec = recording("p", 2500, |i| (i as f64, 0.0));
        let err = make_windows(&rec, &meta("q", false), 5, &ChannelConfig::default()).unwrap_err();
        assert!(matches!(err, PreprocessError::ParticipantMismatch { .. }));
    }

    #[test]
    fn velocity_channels_are_first_differences() {
        let rec = recording("p", 1250, |i| (0.01 * i as f64, -0.02 * i as f64));
        let ws = make_windows(&rec, &meta("p", true), 5, &ChannelConfig::default()).unwrap();
        let w = &ws[0];
        // x increments by 0.01 per 4 ms sample -> 2.5 dva/s
        for t in 0..w.len() {
            assert_relative_eq!(w.data[[2, t]], 2.5, max_relative = 1e-9);
            assert_relative_eq!(w.data[[3, t]], -5.0, max_relative = 1e-9);
        }
        // first velocity sample duplicated from the second
        assert_eq!(w.data[[2, 0]], w.data[[2, 1]]);
        assert!(w.data.iter().all(|v| v.is_finite()));
        assert!(w.label);
    }

    #[test]
    fn windows_overlapping_unrepaired_gaps_are_dropped() {
        let mut rec = recording("p", 2500, |i| (i as f64 * 1e-3, 0.0));
        rec.samples[100].x = None; // in first 5 s window, unrepaired
        let ws = make_windows(&rec, &meta("p", true), 5, &ChannelConfig::default()).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].start_ms, rec.samples[1250].n);
    }

    #[test]
    fn heavily_repaired_windows_are_dropped() {
        let mut rec = recording("p", 2500, |i| (i as f64 * 1e-3, 0.0));
        // mark 30% of the first window as repaired (375 of 1250 samples)
        for i in 0..375 {
            rec.samples[i].interpolated = interp_mask::X;
        }
        // mark 10% of the second window as repaired
        for i in 1250..1375 {
            rec.samples[i].interpolated = interp_mask::Y;
        }
        let ws = make_windows(&rec, &meta("p", true), 5, &ChannelConfig::default()).unwrap();
        assert_eq!(ws.len(), 1);
        // repairs on binocular channels do not affect cyclopean mode
        let mut rec2 = recording("p", 1250, |i| (i as f64 * 1e-3, 0.0));
        for s in rec2.samples.iter_mut() {
            s.interpolated = interp_mask::LX;
        }
        let ws2 = make_windows(&rec2, &meta("p", true), 5, &ChannelConfig::default()).unwrap();
        assert_eq!(ws2.len(), 1);
    }

    #[test]
    fn binocular_mode_uses_per_eye_channels() {
        let cfg = ChannelConfig { mode: ChannelMode::Binocular, ..ChannelConfig::default() };
        let rec = recording("p", 1250, |i| (i as f64 * 1e-3, 2.0));
        let ws = make_windows(&rec, &meta("p", false), 5, &cfg).unwrap();
        let w = &ws[0];
        assert_relative_eq!(w.data[[0, 10]], 10e-3 - 0.1, max_relative = 1e-12); // lx
        assert_relative_eq!(w.data[[3, 10]], 2.1, max_relative = 1e-12); // ry
    }

    fn toy_windows(n: usize, seed: u64) -> Vec<Window> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| Window {
                participant_id: format!("p{i}"),
                task: Task::VRG,
                label: i % 2 == 0,
                start_ms: 0.0,
                duration_s: 5,
                data: Array2::from_shape_fn((4, 50), |(ch, _)| {
                    rng.gen::<f64>() * (ch + 1) as f64 + ch as f64
                }),
            })
            .collect()
    }

    #[test]
    fn normalizer_zeroes_constant_channels() {
        let mut ws = toy_windows(3, 1);
        for w in &mut ws {
            w.data.row_mut(0).fill(3.0);
        }
        let nrm = fit_normalizer(&ws).unwrap();
        let out = apply_normalizer(&ws[0], &nrm);
        assert!(out.data.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalizer_is_identity_on_standardized_data() {
        // channel with exact zero mean, unit population std
        let mut w = toy_windows(1, 2).remove(0);
        let vals: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        for ch in 0..4 {
            for (t, &v) in vals.iter().enumerate() {
                w.data[[ch, t]] = v;
            }
        }
        let ws = vec![w.clone()];
        let nrm = fit_normalizer(&ws).unwrap();
        let out = apply_normalizer(&w, &nrm);
        for (a, b) in out.data.iter().zip(w.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_training_set_has_zero_mean_unit_std() {
        let ws = toy_windows(8, 3);
        let nrm = fit_normalizer(&ws).unwrap();
        let normalized: Vec<Window> = ws.iter().map(|w| apply_normalizer(w, &nrm)).collect();
        let check = fit_normalizer(&normalized).unwrap();
        for ch in 0..4 {
            assert!(check.mean[ch].abs() < 1e-9, "mean {}", check.mean[ch]);
            assert!((check.std[ch] - 1.0).abs() < 1e-9, "std {}", check.std[ch]);
        }
    }

    #[test]
    fn normalizer_never_reads_test_windows() {
        let train = toy_windows(5, 4);
        let mut test = toy_windows(5, 5);
        let before = fit_normalizer(&train).unwrap();
        for w in &mut test {
            w.data.fill(1e9); // poison
        }
        let after = fit_normalizer(&train).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn window_cache_round_trips_bitwise_in_f64() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let ws = toy_windows(4, 6);
        write_window_cache(&path, &ws, "deadbeef", Dtype::F64).unwrap();
        let (read, header) = read_window_cache(&path).unwrap();
        assert_eq!(header.config_hash, "deadbeef");
        assert_eq!(header.n_windows, 4);
        assert_eq!(read, ws);
    }

    #[test]
    fn window_cache_f32_narrows_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache32.bin");
        let ws = toy_windows(2, 7);
        write_window_cache(&path, &ws, "h", Dtype::F32).unwrap();
        let (read, header) = read_window_cache(&path).unwrap();
        assert_eq!(header.dtype, Dtype::F32);
        for (a, b) in read[0].data.iter().zip(ws[0].data.iter()) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn cache_rejects_mixed_durations() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        let mut ws = toy_windows(2, 8);
        ws[1].duration_s = 10;
        let err = write_window_cache(&path, &ws, "h", Dtype::F64).unwrap_err();
        assert!(matches!(err, PreprocessError::CacheFormat(_)));
    }
}
