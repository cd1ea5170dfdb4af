//! Gaze-variance measures: per-recording variance of eye position or
//! orientation, and the sliding-window variance series used for
//! variance-over-time plot data.

use serde::{Deserialize, Serialize};

use crate::ingest::{GazeSample, Recording};

use super::ttest::sample_variance;
use super::StatsError;

/// Which eye a signal is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Eye {
    #[serde(rename = "LEFT")]
    Left,
    #[serde(rename = "RIGHT")]
    Right,
}

impl Eye {
    pub const ALL: [Eye; 2] = [Eye::Left, Eye::Right];
}

impl std::fmt::Display for Eye {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Eye::Left => write!(f, "LEFT"),
            Eye::Right => write!(f, "RIGHT"),
        }
    }
}

/// Which component of gaze is measured: 3D eye position (meters) or the
/// 2D angular orientation (degrees of visual angle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Signal {
    #[serde(rename = "POSITION")]
    Position,
    #[serde(rename = "ORIENTATION")]
    Orientation,
}

impl Signal {
    pub const ALL: [Signal; 2] = [Signal::Position, Signal::Orientation];
}

impl std::fmt::Display for Signal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Signal::Position => write!(f, "POSITION"),
            Signal::Orientation => write!(f, "ORIENTATION"),
        }
    }
}

/// Default sliding-window extent for [`variance_series`], in seconds.
pub const VARIANCE_WINDOW_S: f64 = 1.0;
/// Default sliding-window stride for [`variance_series`], in seconds.
pub const VARIANCE_STRIDE_S: f64 = 0.5;

/// One point of a variance-over-time series; `time_s` is the window center
/// relative to the first sample of the recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub time_s: f64,
    pub variance: f64,
}

/// Extracts the scalar components of the requested signal from one sample.
/// Orientation yields 2 angle components, position 3 spatial components;
/// components are `None` where tracking was lost.
fn components(sample: &GazeSample, signal: Signal, eye: Eye) -> Vec<Option<f64>> {
    match (signal, eye) {
        (Signal::Orientation, Eye::Left) => vec![sample.lx, sample.ly],
        (Signal::Orientation, Eye::Right) => vec![sample.rx, sample.ry],
        (Signal::Position, Eye::Left) => match sample.pos_l {
            Some(p) => p.iter().map(|&v| Some(v)).collect(),
            None => vec![None, None, None],
        },
        (Signal::Position, Eye::Right) => match sample.pos_r {
            Some(p) => p.iter().map(|&v| Some(v)).collect(),
            None => vec![None, None, None],
        },
    }
}

/// Sum of per-component unbiased sample variances over a slice of samples.
/// Missing values are skipped per component; every component must retain at
/// least 2 present samples or the signal counts as missing.
fn variance_of_samples(
    samples: &[GazeSample],
    signal: Signal,
    eye: Eye,
) -> Result<f64, StatsError> {
    let n_components = match signal {
        Signal::Orientation => 2,
        Signal::Position => 3,
    };
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(samples.len()); n_components];
    for s in samples {
        for (i, v) in components(s, signal, eye).into_iter().enumerate() {
            if let Some(v) = v {
                series[i].push(v);
            }
        }
    }
    let mut total = 0.0;
    for (i, xs) in series.iter().enumerate() {
        if xs.len() < 2 {
            return Err(StatsError::MissingSignal(format!(
                "{signal}/{eye} component {i}: {} present samples (need at least 2)",
                xs.len()
            )));
        }
        total += sample_variance(xs);
    }
    Ok(total)
}

/// Variance of the requested gaze signal over the whole recording: the sum
/// of the unbiased sample variances of each signal component (2 angle
/// components for orientation, 3 spatial components for position).
pub fn gaze_variance(rec: &Recording, signal: Signal, eye: Eye) -> Result<f64, StatsError> {
    variance_of_samples(&rec.samples, signal, eye)
}

/// Sliding-window variance series over a recording: windows of `window_s`
/// seconds placed every `stride_s` seconds from the first sample, each
/// reduced with the same component-variance sum as [`gaze_variance`].
/// Windows where any component has fewer than 2 present samples are skipped.
pub fn variance_series(
    rec: &Recording,
    signal: Signal,
    eye: Eye,
    window_s: f64,
    stride_s: f64,
) -> Result<Vec<VariancePoint>, StatsError> {
    if !(window_s > 0.0) || !(stride_s > 0.0) {
        return Err(StatsError::Input(format!(
            "window and stride must be positive, got {window_s} s / {stride_s} s"
        )));
    }
    if rec.samples.is_empty() {
        return Ok(Vec::new());
    }
    let t0 = rec.samples[0].n;
    let t_last = rec.samples[rec.samples.len() - 1].n;
    // duration covered by samples, counting the last sample's own interval
    let duration_ms = t_last - t0 + rec.nominal_interval_ms();
    let window_ms = window_s * 1000.0;
    let stride_ms = stride_s * 1000.0;

    let mut points = Vec::new();
    let mut lo = 0usize; // first sample index with n >= start
    let mut start = 0.0f64;
    while start + window_ms <= duration_ms + 1e-9 {
        let abs_start = t0 + start;
        let abs_end = abs_start + window_ms;
        while lo < rec.samples.len() && rec.samples[lo].n < abs_start {
            lo += 1;
        }
        let mut hi = lo;
        while hi < rec.samples.len() && rec.samples[hi].n < abs_end {
            hi += 1;
        }
        if let Ok(v) = variance_of_samples(&rec.samples[lo..hi], signal, eye) {
            points.push(VariancePoint {
                time_s: (start + window_ms / 2.0) / 1000.0,
                variance: v,
            });
        }
        start += stride_ms;
    }
    Ok(points)
}
