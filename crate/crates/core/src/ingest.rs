//! GazeBaseVR-format ingest: per-task gaze recordings and participant metadata.
//!
//! Recordings are CSV files, one per (participant, session, task), named
//! `<prefix>_<participant>_<session>_<task>.csv` (e.g. `S_1004_S1_VRG.csv`)
//! with a header row. Empty or unparseable angle fields mark tracking loss
//! (blinks); such rows are kept as explicit gaps, never zero-filled. Column
//! names are configuration-driven via [`ColumnSchema`] so other header
//! conventions can be bound without code changes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The five recording tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Vergence: fixations alternating in depth.
    VRG,
    /// Smooth pursuit of a moving target.
    PUR,
    /// Free viewing of a video clip.
    VID,
    /// Reading a text passage.
    TEX,
    /// Random saccades to jumping targets.
    RAN,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::VRG, Task::PUR, Task::VID, Task::TEX, Task::RAN];
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::VRG => "VRG",
            Task::PUR => "PUR",
            Task::VID => "VID",
            Task::TEX => "TEX",
            Task::RAN => "RAN",
        };
        f.write_str(s)
    }
}

impl FromStr for Task {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "VRG" => Ok(Task::VRG),
            "PUR" => Ok(Task::PUR),
            "VID" => Ok(Task::VID),
            "TEX" => Ok(Task::TEX),
            "RAN" => Ok(Task::RAN),
            other => Err(IngestError::UnknownTask { token: other.to_string() }),
        }
    }
}

/// One 250 Hz sample. Angle fields are degrees of visual angle (dva);
/// `None` marks tracking loss. Positions are meters, directions unit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Timestamp in milliseconds, monotone within a recording.
    pub n: f64,
    /// Cyclopean horizontal gaze angle.
    pub x: Option<f64>,
    /// Cyclopean vertical gaze angle.
    pub y: Option<f64>,
    pub lx: Option<f64>,
    pub ly: Option<f64>,
    pub rx: Option<f64>,
    pub ry: Option<f64>,
    pub pos_l: Option<[f64; 3]>,
    pub pos_r: Option<[f64; 3]>,
    pub dir_l: Option<[f64; 3]>,
    pub dir_r: Option<[f64; 3]>,
    /// Bitmask of angle channels filled in by gap repair; see the
    /// `interp_mask` constants. Zero for samples as parsed.
    #[serde(default, skip_serializing_if = "is_zero_u8")]
    pub interpolated: u8,
}

fn is_zero_u8(v: &u8) -> bool {
    *v == 0
}

/// Bit assignments for [`GazeSample::interpolated`].
pub mod interp_mask {
    pub const X: u8 = 1 << 0;
    pub const Y: u8 = 1 << 1;
    pub const LX: u8 = 1 << 2;
    pub const LY: u8 = 1 << 3;
    pub const RX: u8 = 1 << 4;
    pub const RY: u8 = 1 << 5;
}

impl GazeSample {
    pub fn empty(n: f64) -> Self {
        GazeSample {
            n,
            x: None,
            y: None,
            lx: None,
            ly: None,
            rx: None,
            ry: None,
            pos_l: None,
            pos_r: None,
            dir_l: None,
            dir_r: None,
            interpolated: 0,
        }
    }

    /// A sample is a gap when any angle channel is missing.
    pub fn has_gap(&self) -> bool {
        self.x.is_none()
            || self.y.is_none()
            || self.lx.is_none()
            || self.ly.is_none()
            || self.rx.is_none()
            || self.ry.is_none()
    }
}

/// One task session's gaze time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub participant_id: String,
    pub session_id: String,
    pub task: Task,
    /// Nominal sampling rate; the observed median interval is validated
    /// against this at parse time.
    pub sample_rate_hz: f64,
    pub samples: Vec<GazeSample>,
}

impl Recording {
    pub fn nominal_interval_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn gap_count(&self) -> usize {
        self.samples.iter().filter(|s| s.has_gap()).count()
    }
}

/// Maps column roles to header names. Defaults target the public
/// GazeBaseVR release; alternate headers are bound via configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSchema {
    pub n: String,
    pub x: String,
    pub y: String,
    pub lx: String,
    pub ly: String,
    pub rx: String,
    pub ry: String,
    /// Optional per-eye 3D position columns (meters), `[x, y, z]`.
    pub pos_l: Option<[String; 3]>,
    pub pos_r: Option<[String; 3]>,
    /// Optional per-eye 3D gaze-direction columns, `[x, y, z]`.
    pub dir_l: Option<[String; 3]>,
    pub dir_r: Option<[String; 3]>,
    /// Nominal sampling rate of the source files.
    pub sample_rate_hz: f64,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        fn triple(prefix: &str) -> Option<[String; 3]> {
            Some([format!("{prefix}x"), format!("{prefix}y"), format!("{prefix}z")])
        }
        ColumnSchema {
            n: "n".into(),
            x: "x".into(),
            y: "y".into(),
            lx: "lx".into(),
            ly: "ly".into(),
            rx: "rx".into(),
            ry: "ry".into(),
            pos_l: triple("lp"),
            pos_r: triple("rp"),
            dir_l: triple("ld"),
            dir_r: triple("rd"),
            sample_rate_hz: 250.0,
        }
    }
}

/// Per-file parse diagnostics, emitted as one JSON line per file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseReport {
    pub path: String,
    /// Data rows in the source file (header excluded).
    pub rows: usize,
    /// Rows with at least one missing/unparseable angle field.
    pub gaps: usize,
    /// Rows dropped because their timestamp repeated the previous one.
    pub duplicate_timestamps: usize,
    /// Angle values outside ±90 dva, converted to missing.
    pub out_of_range: usize,
    /// Rows dropped entirely (bad timestamp or malformed record).
    pub dropped_rows: usize,
    pub errors: Vec<String>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column `{column}` in {path}")]
    MissingColumn { column: String, path: String },
    #[error("non-monotone timestamps at data row {row} in {path}")]
    NonMonotoneTime { row: usize, path: String },
    #[error("recording {path} contains no usable samples")]
    EmptyRecording { path: String },
    #[error("cannot derive (participant, session, task) from file name `{path}`: {reason}")]
    BadPath { path: String, reason: String },
    #[error("unknown task token `{token}`")]
    UnknownTask { token: String },
    #[error(
        "median inter-sample interval {observed_ms:.3} ms deviates more than 20% \
         from nominal {nominal_ms:.3} ms in {path}"
    )]
    SampleRate { observed_ms: f64, nominal_ms: f64, path: String },
    #[error("participant {participant} has no fatigue label")]
    MissingFatigueLabel { participant: String },
    #[error("metadata file {path} is missing required column `{column}`")]
    MissingMetaColumn { column: String, path: String },
    #[error("cannot read metadata file {path}: {detail}")]
    MetadataUnreadable { path: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn fmt_f64(v: f64) -> String {
    // `{}` is Rust's shortest round-trip formatting: re-parsing yields the
    // identical bit pattern, which the CSV round-trip property relies on.
    format!("{v}")
}

fn parse_field(raw: Option<&str>) -> Option<f64> {
    let s = raw?.trim();
    if s.is_empty() {
        return None;
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

/// Splits `S_1004_S1_VRG.csv` into ("1004", "S1", VRG). The convention is
/// `<...>_<participant>_<session>_<task>.csv` with at least three tokens.
pub fn parse_file_name(path: &Path) -> Result<(String, String, Task), IngestError> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| IngestError::BadPath {
            path: path.display().to_string(),
            reason: "no UTF-8 file stem".into(),
        })?;
    let tokens: Vec<&str> = stem.split('_').collect();
    if tokens.len() < 3 {
        return Err(IngestError::BadPath {
            path: path.display().to_string(),
            reason: "expected `<...>_<participant>_<session>_<task>.csv`".into(),
        });
    }
    let task = tokens[tokens.len() - 1].parse::<Task>().map_err(|e| IngestError::BadPath {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let session = tokens[tokens.len() - 2].to_string();
    let participant = tokens[tokens.len() - 3].to_string();
    Ok((participant, session, task))
}

struct ColumnIndices {
    n: usize,
    x: usize,
    y: usize,
    lx: usize,
    ly: usize,
    rx: usize,
    ry: usize,
    pos_l: Option<[usize; 3]>,
    pos_r: Option<[usize; 3]>,
    dir_l: Option<[usize; 3]>,
    dir_r: Option<[usize; 3]>,
}

fn resolve_header(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .or_else(|| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name)))
}

impl ColumnIndices {
    fn resolve(headers: &csv::StringRecord, schema: &ColumnSchema, path: &str) -> Result<Self, IngestError> {
        let required = |name: &str| {
            resolve_header(headers, name).ok_or_else(|| IngestError::MissingColumn {
                column: name.to_string(),
                path: path.to_string(),
            })
        };
        let optional_triple = |names: &Option<[String; 3]>| -> Option<[usize; 3]> {
            let names = names.as_ref()?;
            let a = resolve_header(headers, &names[0])?;
            let b = resolve_header(headers, &names[1])?;
            let c = resolve_header(headers, &names[2])?;
            Some([a, b, c])
        };
        Ok(ColumnIndices {
            n: required(&schema.n)?,
            x: required(&schema.x)?,
            y: required(&schema.y)?,
            lx: required(&schema.lx)?,
            ly: required(&schema.ly)?,
            rx: required(&schema.rx)?,
            ry: required(&schema.ry)?,
            pos_l: optional_triple(&schema.pos_l),
            pos_r: optional_triple(&schema.pos_r),
            dir_l: optional_triple(&schema.dir_l),
            dir_r: optional_triple(&schema.dir_r),
        })
    }
}

const MAX_ABS_ANGLE_DVA: f64 = 90.0;
const DIR_NORM_TOL: f64 = 1e-6;

/// Clamp-free angle validation: values beyond ±90 dva are physically
/// impossible gaze angles and become missing (counted in the report).
fn validate_angle(v: Option<f64>, out_of_range: &mut usize) -> Option<f64> {
    match v {
        Some(a) if a.abs() <= MAX_ABS_ANGLE_DVA => Some(a),
        Some(_) => {
            *out_of_range += 1;
            None
        }
        None => None,
    }
}

fn read_triple(record: &csv::StringRecord, idx: Option<[usize; 3]>) -> Option<[f64; 3]> {
    let idx = idx?;
    let a = parse_field(record.get(idx[0]))?;
    let b = parse_field(record.get(idx[1]))?;
    let c = parse_field(record.get(idx[2]))?;
    Some([a, b, c])
}

/// Renormalizes a direction vector unless it is already within tolerance of
/// unit length (keeping already-valid bits intact preserves CSV round-trips).
/// Near-zero vectors are unusable and become missing.
fn normalize_dir(v: Option<[f64; 3]>, out_of_range: &mut usize) -> Option<[f64; 3]> {
    let v = v?;
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm < 1e-9 {
        *out_of_range += 1;
        return None;
    }
    if (norm - 1.0).abs() <= DIR_NORM_TOL {
        Some(v)
    } else {
        Some([v[0] / norm, v[1] / norm, v[2] / norm])
    }
}

/// Parses one recording CSV. Missing angle fields become explicit gaps;
/// duplicate timestamps keep the first occurrence; a decreasing timestamp is
/// a hard error since sample order is the time axis.
pub fn parse_recording(
    path: &Path,
    schema: &ColumnSchema,
) -> Result<(Recording, ParseReport), IngestError> {
    let (participant_id, session_id, task) = parse_file_name(path)?;
    let path_str = path.display().to_string();
    let mut report = ParseReport { path: path_str.clone(), ..ParseReport::default() };

    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let cols = ColumnIndices::resolve(&headers, schema, &path_str)?;

    let mut samples: Vec<GazeSample> = Vec::new();
    for (row_idx, result) in reader.records().enumerate() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                report.dropped_rows += 1;
                report.errors.push(format!("row {}: {e}", row_idx + 1));
                continue;
            }
        };
        report.rows += 1;
        let n = match parse_field(record.get(cols.n)) {
            Some(v) => v,
            None => {
                report.dropped_rows += 1;
                report.errors.push(format!("row {}: missing timestamp", row_idx + 1));
                continue;
            }
        };
        if let Some(prev) = samples.last() {
            if n < prev.n {
                return Err(IngestError::NonMonotoneTime { row: row_idx + 1, path: path_str });
            }
            if n == prev.n {
                report.duplicate_timestamps += 1;
                continue;
            }
        }
        let oor = &mut report.out_of_range;
        let sample = GazeSample {
            n,
            x: validate_angle(parse_field(record.get(cols.x)), oor),
            y: validate_angle(parse_field(record.get(cols.y)), oor),
            lx: validate_angle(parse_field(record.get(cols.lx)), oor),
            ly: validate_angle(parse_field(record.get(cols.ly)), oor),
            rx: validate_angle(parse_field(record.get(cols.rx)), oor),
            ry: validate_angle(parse_field(record.get(cols.ry)), oor),
            pos_l: read_triple(&record, cols.pos_l),
            pos_r: read_triple(&record, cols.pos_r),
            dir_l: normalize_dir(read_triple(&record, cols.dir_l), oor),
            dir_r: normalize_dir(read_triple(&record, cols.dir_r), oor),
            interpolated: 0,
        };
        if sample.has_gap() {
            report.gaps += 1;
        }
        samples.push(sample);
    }

    if samples.is_empty() {
        return Err(IngestError::EmptyRecording { path: path_str });
    }

    let nominal_ms = 1000.0 / schema.sample_rate_hz;
    if samples.len() >= 2 {
        let mut diffs: Vec<f64> = samples.windows(2).map(|w| w[1].n - w[0].n).collect();
        diffs.sort_by(|a, b| a.total_cmp(b));
        let median = diffs[diffs.len() / 2];
        if (median - nominal_ms).abs() > 0.2 * nominal_ms {
            return Err(IngestError::SampleRate {
                observed_ms: median,
                nominal_ms,
                path: path_str,
            });
        }
    }

    let recording = Recording {
        participant_id,
        session_id,
        task,
        sample_rate_hz: schema.sample_rate_hz,
        samples,
    };
    Ok((recording, report))
}

/// Writes a recording back to CSV under the given schema. Missing values are
/// empty fields; numbers use shortest round-trip formatting, so
/// parse → write → parse is lossless.
pub fn write_recording_csv(
    rec: &Recording,
    path: &Path,
    schema: &ColumnSchema,
) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = vec![
        schema.n.clone(),
        schema.x.clone(),
        schema.y.clone(),
        schema.lx.clone(),
        schema.ly.clone(),
        schema.rx.clone(),
        schema.ry.clone(),
    ];
    for triple in [&schema.pos_l, &schema.pos_r, &schema.dir_l, &schema.dir_r]
        .into_iter()
        .flatten()
    {
        header.extend(triple.iter().cloned());
    }
    writer.write_record(&header)?;

    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for s in &rec.samples {
        let mut row: Vec<String> = vec![
            fmt_f64(s.n),
            opt(s.x),
            opt(s.y),
            opt(s.lx),
            opt(s.ly),
            opt(s.rx),
            opt(s.ry),
        ];
        for (cols, value) in [
            (&schema.pos_l, s.pos_l),
            (&schema.pos_r, s.pos_r),
            (&schema.dir_l, s.dir_l),
            (&schema.dir_r, s.dir_r),
        ] {
            if cols.is_some() {
                match value {
                    Some(v) => row.extend(v.iter().copied().map(fmt_f64)),
                    None => row.extend(std::iter::repeat(String::new()).take(3)),
                }
            }
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Participant gender as recorded in the metadata; parsed loosely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    NonBinary,
    Other,
    Unspecified,
}

impl Gender {
    fn parse(s: &str) -> Gender {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "male" | "man" => Gender::Male,
            "f" | "female" | "woman" => Gender::Female,
            "nb" | "nonbinary" | "non-binary" => Gender::NonBinary,
            "" => Gender::Unspecified,
            _ => Gender::Other,
        }
    }
}

/// The five self-report instruments with their documented closed ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    /// Stanford Sleepiness Scale, 1–7.
    Sleepiness,
    /// Neck fatigue, 1–5.
    NeckFatigue,
    /// Physical comfort, 1–6.
    PhysicalComfort,
    /// Mental effort, 1–5.
    MentalEffort,
    /// Physical effort, 1–5.
    PhysicalEffort,
}

impl Measure {
    pub const ALL: [Measure; 5] = [
        Measure::Sleepiness,
        Measure::NeckFatigue,
        Measure::PhysicalComfort,
        Measure::MentalEffort,
        Measure::PhysicalEffort,
    ];

    pub fn range(&self) -> (f64, f64) {
        match self {
            Measure::Sleepiness => (1.0, 7.0),
            Measure::NeckFatigue => (1.0, 5.0),
            Measure::PhysicalComfort => (1.0, 6.0),
            Measure::MentalEffort => (1.0, 5.0),
            Measure::PhysicalEffort => (1.0, 5.0),
        }
    }

    /// Column-name stem used by the default metadata schema
    /// (`<stem>_pre` / `<stem>_post`).
    pub fn column_stem(&self) -> &'static str {
        match self {
            Measure::Sleepiness => "sleepiness",
            Measure::NeckFatigue => "neck_fatigue",
            Measure::PhysicalComfort => "physical_comfort",
            Measure::MentalEffort => "mental_effort",
            Measure::PhysicalEffort => "physical_effort",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Measure::Sleepiness => "Sleepiness",
            Measure::NeckFatigue => "Neck Fatigue",
            Measure::PhysicalComfort => "Physical Comfort",
            Measure::MentalEffort => "Mental Effort",
            Measure::PhysicalEffort => "Physical Effort",
        };
        f.write_str(s)
    }
}

/// Pre-/post-session value pair for one subjective measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PrePost {
    pub pre: Option<f64>,
    pub post: Option<f64>,
}

/// All five subjective measures for one session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubjectiveRatings {
    pub sleepiness: PrePost,
    pub neck_fatigue: PrePost,
    pub physical_comfort: PrePost,
    pub mental_effort: PrePost,
    pub physical_effort: PrePost,
}

impl SubjectiveRatings {
    pub fn get(&self, m: Measure) -> PrePost {
        match m {
            Measure::Sleepiness => self.sleepiness,
            Measure::NeckFatigue => self.neck_fatigue,
            Measure::PhysicalComfort => self.physical_comfort,
            Measure::MentalEffort => self.mental_effort,
            Measure::PhysicalEffort => self.physical_effort,
        }
    }

    fn get_mut(&mut self, m: Measure) -> &mut PrePost {
        match m {
            Measure::Sleepiness => &mut self.sleepiness,
            Measure::NeckFatigue => &mut self.neck_fatigue,
            Measure::PhysicalComfort => &mut self.physical_comfort,
            Measure::MentalEffort => &mut self.mental_effort,
            Measure::PhysicalEffort => &mut self.physical_effort,
        }
    }
}

/// Participant demographics and self-reports for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub participant_id: String,
    pub session_id: String,
    pub age: Option<f64>,
    pub gender: Gender,
    /// Self-reported fatigue, the supervised target.
    pub fatigue_label: bool,
    pub hours_slept: Option<f64>,
    pub subjective: SubjectiveRatings,
}

/// Successful metadata load plus non-fatal diagnostics (excluded rows,
/// out-of-range ratings).
#[derive(Debug, Clone, Default)]
pub struct MetadataLoad {
    pub metas: Vec<SessionMeta>,
    pub warnings: Vec<String>,
}

/// Participant-level summary of a metadata collection. Participants with
/// multiple sessions count once; the first session's label wins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaSummary {
    pub n_participants: usize,
    pub n_fatigued: usize,
    pub n_non_fatigued: usize,
    pub mean_hours_slept_fatigued: Option<f64>,
    pub mean_hours_slept_non_fatigued: Option<f64>,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Loads the participant metadata CSV.
///
/// Required columns: `participant_id` (alias `subject`/`id`) and `fatigue`
/// (alias `fatigue_label`). Optional: `session_id`, `age`, `gender`,
/// `hours_slept` (alias `hsln`), and `<measure>_pre`/`<measure>_post` for the
/// five subjective measures. Rows without a fatigue label are excluded with a
/// warning; out-of-range subjective values become missing with a warning.
pub fn load_metadata(path: &Path) -> Result<MetadataLoad, IngestError> {
    let path_str = path.display().to_string();
    let mut reader =
        csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| {
            IngestError::MetadataUnreadable { path: path_str.clone(), detail: e.to_string() }
        })?;
    let headers = reader.headers()?.clone();

    let find = |aliases: &[&str]| -> Option<usize> {
        aliases.iter().find_map(|a| resolve_header(&headers, a))
    };
    let mut load = MetadataLoad::default();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        load.warnings.push(format!("{path_str}: empty metadata file"));
        return Ok(load);
    }
    let id_col = find(&["participant_id", "subject", "id"]).ok_or_else(|| {
        IngestError::MissingMetaColumn { column: "participant_id".into(), path: path_str.clone() }
    })?;
    let fatigue_col = find(&["fatigue", "fatigue_label"]).ok_or_else(|| {
        IngestError::MissingMetaColumn { column: "fatigue".into(), path: path_str.clone() }
    })?;
    let session_col = find(&["session_id", "session"]);
    let age_col = find(&["age"]);
    let gender_col = find(&["gender", "sex"]);
    let hours_col = find(&["hours_slept", "hsln"]);
    let measure_cols: Vec<(Measure, Option<usize>, Option<usize>)> = Measure::ALL
        .iter()
        .map(|&m| {
            let stem = m.column_stem();
            (
                m,
                find(&[&format!("{stem}_pre")]),
                find(&[&format!("{stem}_post")]),
            )
        })
        .collect();

    for (row_idx, result) in reader.records().enumerate() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                load.warnings.push(format!("{path_str} row {}: {e}", row_idx + 1));
                continue;
            }
        };
        let get = |i: usize| record.get(i).unwrap_or("");
        let participant_id = get(id_col).trim().to_string();
        if participant_id.is_empty() {
            load.warnings.push(format!("{path_str} row {}: empty participant id", row_idx + 1));
            continue;
        }
        let fatigue_label = match parse_bool(get(fatigue_col)) {
            Some(b) => b,
            None => {
                load.warnings.push(
                    IngestError::MissingFatigueLabel { participant: participant_id }.to_string(),
                );
                continue;
            }
        };
        let mut subjective = SubjectiveRatings::default();
        for &(measure, pre_col, post_col) in &measure_cols {
            let (lo, hi) = measure.range();
            let mut read = |col: Option<usize>, which: &str| -> Option<f64> {
                let v = parse_field(col.and_then(|c| record.get(c)))?;
                if (lo..=hi).contains(&v) {
                    Some(v)
                } else {
                    load.warnings.push(format!(
                        "{path_str} row {}: {measure} {which} value {v} outside [{lo}, {hi}]",
                        row_idx + 1
                    ));
                    None
                }
            };
            let slot = subjective.get_mut(measure);
            slot.pre = read(pre_col, "pre");
            slot.post = read(post_col, "post");
        }
        load.metas.push(SessionMeta {
            participant_id,
            session_id: session_col.map(|c| get(c).trim().to_string()).unwrap_or_else(|| "S1".into()),
            age: parse_field(age_col.and_then(|c| record.get(c))),
            gender: gender_col.map(|c| Gender::parse(get(c))).unwrap_or(Gender::Unspecified),
            fatigue_label,
            hours_slept: parse_field(hours_col.and_then(|c| record.get(c))),
            subjective,
        });
    }
    if load.metas.is_empty() {
        load.warnings.push(format!("{path_str}: no usable metadata rows"));
    }
    Ok(load)
}

/// Participant-level counts and sleep means, deduplicated by participant.
pub fn summarize_metadata(metas: &[SessionMeta]) -> MetaSummary {
    let mut by_participant: BTreeMap<&str, &SessionMeta> = BTreeMap::new();
    for m in metas {
        by_participant.entry(m.participant_id.as_str()).or_insert(m);
    }
    let mut n_fat = 0usize;
    let mut n_non = 0usize;
    let mut hours_fat: Vec<f64> = Vec::new();
    let mut hours_non: Vec<f64> = Vec::new();
    for m in by_participant.values() {
        if m.fatigue_label {
            n_fat += 1;
            hours_fat.extend(m.hours_slept);
        } else {
            n_non += 1;
            hours_non.extend(m.hours_slept);
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    MetaSummary {
        n_participants: n_fat + n_non,
        n_fatigued: n_fat,
        n_non_fatigued: n_non,
        mean_hours_slept_fatigued: mean(&hours_fat),
        mean_hours_slept_non_fatigued: mean(&hours_non),
    }
}

/// Recordings joined to metadata, bucketed by (participant, task).
#[derive(Debug, Clone, Default)]
pub struct SessionIndex {
    pub recordings: Vec<Recording>,
    /// First-seen metadata per participant.
    pub meta_by_participant: BTreeMap<String, SessionMeta>,
    /// (participant, task) → indices into `recordings`.
    pub buckets: BTreeMap<(String, Task), Vec<usize>>,
    /// Participants with recordings but no metadata (deduplicated, sorted).
    pub orphans: Vec<String>,
}

impl SessionIndex {
    pub fn lookup(&self, participant: &str, task: Task) -> &[usize] {
        self.buckets
            .get(&(participant.to_string(), task))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn entry_count(&self) -> usize {
        self.buckets.len()
    }

    /// Participants that have both metadata and at least one recording.
    pub fn labeled_participants(&self) -> Vec<(String, bool)> {
        let with_recordings: BTreeSet<&str> =
            self.recordings.iter().map(|r| r.participant_id.as_str()).collect();
        self.meta_by_participant
            .iter()
            .filter(|(id, _)| with_recordings.contains(id.as_str()))
            .map(|(id, m)| (id.clone(), m.fatigue_label))
            .collect()
    }

    pub fn label_of(&self, participant: &str) -> Option<bool> {
        self.meta_by_participant.get(participant).map(|m| m.fatigue_label)
    }

    pub fn recordings_for_task(&self, task: Task) -> Vec<usize> {
        self.buckets
            .iter()
            .filter(|((_, t), _)| *t == task)
            .flat_map(|(_, v)| v.iter().copied())
            .collect()
    }
}

/// Joins recordings to metadata. Every recording lands in exactly one
/// (participant, task) bucket; recordings whose participant has no metadata
/// are additionally flagged in `orphans`.
pub fn index_sessions(recordings: Vec<Recording>, metas: &[SessionMeta]) -> SessionIndex {
    let mut index = SessionIndex::default();
    for m in metas {
        index
            .meta_by_participant
            .entry(m.participant_id.clone())
            .or_insert_with(|| m.clone());
    }
    let mut orphan_set: BTreeSet<String> = BTreeSet::new();
    for (i, rec) in recordings.iter().enumerate() {
        if !index.meta_by_participant.contains_key(&rec.participant_id) {
            orphan_set.insert(rec.participant_id.clone());
        }
        index
            .buckets
            .entry((rec.participant_id.clone(), rec.task))
            .or_default()
            .push(i);
    }
    index.orphans = orphan_set.into_iter().collect();
    index.recordings = recordings;
    index
}
