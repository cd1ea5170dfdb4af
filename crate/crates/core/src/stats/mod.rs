//! Statistical analysis: gaze-variance measures, Student t-tests, and the
//! two result batteries (between-group variance comparisons and the
//! subjective-ratings table).

pub mod battery;
pub mod dist;
pub mod ttest;
pub mod variance;

pub use battery::{
    subjective_battery, variance_battery, Group, GroupMeans, SubjectiveBattery,
    SubjectiveMeasure, SubjectiveRow, TestColumn, TestOutcome, VarianceCell,
};
pub use dist::{inc_beta, ln_gamma, t_two_sided_p};
pub use ttest::{paired_t, two_sample_t, StatResult, TestKind};
pub use variance::{
    gaze_variance, variance_series, Eye, Signal, VariancePoint, VARIANCE_STRIDE_S,
    VARIANCE_WINDOW_S,
};

/// Errors from statistical computations.
#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    /// A gaze signal's components have too few present samples.
    #[error("missing signal: {0}")]
    MissingSignal(String),
    /// Paired inputs of different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// The test statistic is undefined for the given data (zero variance,
    /// too few values).
    #[error("degenerate test: {0}")]
    DegenerateTest(String),
    /// No usable subjective ratings for a measure.
    #[error("missing ratings: {0}")]
    MissingRatings(String),
    /// Invalid parameter (window sizes, strides, …).
    #[error("invalid input: {0}")]
    Input(String),
}
