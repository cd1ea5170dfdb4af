//! The two statistical batteries: between-group comparisons of gaze
//! variance per (task, eye, signal), and the subjective-ratings table with
//! pre/post group means and four test columns per measure.

use serde::{Deserialize, Serialize};

use crate::ingest::{Measure, SessionIndex, SessionMeta, Task};

use super::ttest::{mean, paired_t, two_sample_t, StatResult};
use super::variance::{gaze_variance, Eye, Signal};
use super::StatsError;

/// A test either produced a result or was recorded as inapplicable (e.g.
/// degenerate input); batteries never abort on a single bad cell.
pub type TestOutcome = Result<StatResult, String>;

/// Fatigue condition of a participant group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    NoFatigue,
    Fatigue,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::NoFatigue, Group::Fatigue];
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Group::NoFatigue => write!(f, "No Fatigue"),
            Group::Fatigue => write!(f, "Fatigue"),
        }
    }
}

/// One row of the gaze-variance battery: group means of per-participant
/// variance and both two-sample test forms (Welch and pooled), non-fatigued
/// group first in every comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceCell {
    pub task: Task,
    pub eye: Eye,
    pub signal: Signal,
    pub n_no_fatigue: usize,
    pub n_fatigue: usize,
    pub mean_no_fatigue: Option<f64>,
    pub mean_fatigue: Option<f64>,
    pub welch: TestOutcome,
    pub pooled: TestOutcome,
}

/// Between-group comparison of gaze variance for every (task, eye, signal)
/// combination — 5 × 2 × 2 = 20 rows in a fixed order.
///
/// Each labeled participant contributes one value per cell: the mean of the
/// whole-recording [`gaze_variance`] over their recordings of the task
/// (recordings without the signal are skipped). Cells where a test cannot
/// run carry the reason instead of a result.
pub fn variance_battery(index: &SessionIndex) -> Vec<VarianceCell> {
    let participants = index.labeled_participants();
    let mut cells = Vec::with_capacity(20);
    for task in Task::ALL {
        for eye in Eye::ALL {
            for signal in Signal::ALL {
                // values[0] = non-fatigued, values[1] = fatigued
                let mut values: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
                for (pid, label) in &participants {
                    let per_recording: Vec<f64> = index
                        .lookup(pid, task)
                        .iter()
                        .filter_map(|&ri| gaze_variance(&index.recordings[ri], signal, eye).ok())
                        .collect();
                    if !per_recording.is_empty() {
                        values[*label as usize].push(mean(&per_recording));
                    }
                }
                let welch = two_sample_t(&values[0], &values[1], false)
                    .map_err(|e| e.to_string());
                let pooled = two_sample_t(&values[0], &values[1], true)
                    .map_err(|e| e.to_string());
                cells.push(VarianceCell {
                    task,
                    eye,
                    signal,
                    n_no_fatigue: values[0].len(),
                    n_fatigue: values[1].len(),
                    mean_no_fatigue: (!values[0].is_empty()).then(|| mean(&values[0])),
                    mean_fatigue: (!values[1].is_empty()).then(|| mean(&values[1])),
                    welch,
                    pooled,
                });
            }
        }
    }
    cells
}

/// Pre/post/Δ means of one group for one subjective measure, over the
/// participants of that group with a complete pre/post pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroupMeans {
    pub group: Group,
    pub n: usize,
    pub pre: f64,
    pub post: f64,
    pub delta: f64,
}

/// Which statistics column of the subjective table a test belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestColumn {
    /// Two-sample test of pre-session ratings, no-fatigue vs fatigue.
    PreGroup,
    /// Two-sample test of post-session ratings, no-fatigue vs fatigue.
    PostGroup,
    /// Within-group paired test of pre vs post (one result per group).
    Paired,
    /// Two-sample test of the post − pre change, no-fatigue vs fatigue.
    DeltaGroup,
}

impl std::fmt::Display for TestColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestColumn::PreGroup => write!(f, "Pre-Group t (p)"),
            TestColumn::PostGroup => write!(f, "Post-Group t (p)"),
            TestColumn::Paired => write!(f, "Paired t (p)"),
            TestColumn::DeltaGroup => write!(f, "Δ Group t (p)"),
        }
    }
}

/// One subjective measure's block of the table: both groups' means and the
/// four statistics columns. Sign conventions: group tests compare
/// no-fatigue − fatigue; paired tests compare pre − post; Δ = post − pre.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectiveMeasure {
    pub measure: Measure,
    pub groups: [GroupMeans; 2],
    pub pre_group: TestOutcome,
    pub post_group: TestOutcome,
    pub paired: [TestOutcome; 2],
    pub delta_group: TestOutcome,
}

/// Subjective-ratings battery output: per-measure blocks plus warnings for
/// measures that had to be skipped.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SubjectiveBattery {
    pub measures: Vec<SubjectiveMeasure>,
    pub warnings: Vec<String>,
}

/// One flat row of the subjective table: either a group's means or one
/// statistics column (the paired column carries one outcome per group).
#[derive(Debug, Clone)]
pub enum SubjectiveRow {
    GroupMeans { measure: Measure, means: GroupMeans },
    Test { measure: Measure, column: TestColumn, outcomes: Vec<(Option<Group>, TestOutcome)> },
}

impl SubjectiveBattery {
    /// Flattens to 2 group-mean rows + 4 test rows per measure.
    pub fn rows(&self) -> Vec<SubjectiveRow> {
        let mut rows = Vec::with_capacity(self.measures.len() * 6);
        for m in &self.measures {
            for g in m.groups {
                rows.push(SubjectiveRow::GroupMeans { measure: m.measure, means: g });
            }
            rows.push(SubjectiveRow::Test {
                measure: m.measure,
                column: TestColumn::PreGroup,
                outcomes: vec![(None, m.pre_group.clone())],
            });
            rows.push(SubjectiveRow::Test {
                measure: m.measure,
                column: TestColumn::PostGroup,
                outcomes: vec![(None, m.post_group.clone())],
            });
            rows.push(SubjectiveRow::Test {
                measure: m.measure,
                column: TestColumn::Paired,
                outcomes: vec![
                    (Some(Group::NoFatigue), m.paired[0].clone()),
                    (Some(Group::Fatigue), m.paired[1].clone()),
                ],
            });
            rows.push(SubjectiveRow::Test {
                measure: m.measure,
                column: TestColumn::DeltaGroup,
                outcomes: vec![(None, m.delta_group.clone())],
            });
        }
        rows
    }
}

/// Runs the subjective-ratings battery over session metadata.
///
/// For each measure, participants with a complete pre/post pair are split by
/// fatigue label; the battery emits both groups' pre/post/Δ means, the
/// two-sample tests of pre, post and Δ ratings between groups (no-fatigue
/// first), and a paired pre-vs-post test within each group. A measure with
/// no complete pair in either group is skipped with a warning.
pub fn subjective_battery(metas: &[SessionMeta]) -> SubjectiveBattery {
    let mut battery = SubjectiveBattery::default();
    for measure in Measure::ALL {
        // index 0 = non-fatigued, 1 = fatigued
        let mut pre: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut post: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut delta: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for meta in metas {
            let pair = meta.subjective.get(measure);
            if let (Some(a), Some(b)) = (pair.pre, pair.post) {
                let g = meta.fatigue_label as usize;
                pre[g].push(a);
                post[g].push(b);
                delta[g].push(b - a);
            }
        }
        if pre[0].is_empty() || pre[1].is_empty() {
            let err = StatsError::MissingRatings(format!(
                "{measure}: skipped — complete pre/post pairs: {} no-fatigue, {} fatigue",
                pre[0].len(),
                pre[1].len()
            ));
            battery.warnings.push(err.to_string());
            continue;
        }
        let groups = [0usize, 1].map(|g| GroupMeans {
            group: Group::ALL[g],
            n: pre[g].len(),
            pre: mean(&pre[g]),
            post: mean(&post[g]),
            delta: mean(&delta[g]),
        });
        let as_outcome = |r: Result<StatResult, StatsError>| r.map_err(|e| e.to_string());
        battery.measures.push(SubjectiveMeasure {
            measure,
            groups,
            pre_group: as_outcome(two_sample_t(&pre[0], &pre[1], false)),
            post_group: as_outcome(two_sample_t(&post[0], &post[1], false)),
            paired: [
                as_outcome(paired_t(&pre[0], &post[0])),
                as_outcome(paired_t(&pre[1], &post[1])),
            ],
            delta_group: as_outcome(two_sample_t(&delta[0], &delta[1], false)),
        });
    }
    battery
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{index_sessions, GazeSample, Gender, PrePost, Recording, SubjectiveRatings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta(pid: &str, fatigued: bool, ratings: SubjectiveRatings) -> SessionMeta {
        SessionMeta {
            participant_id: pid.to_string(),
            session_id: "S1".to_string(),
            age: None,
            gender: Gender::Unspecified,
            fatigue_label: fatigued,
            hours_slept: None,
            subjective: ratings,
        }
    }

    fn uniform_ratings(rng: &mut ChaCha8Rng) -> SubjectiveRatings {
        let mut pair = || PrePost {
            pre: Some(rng.gen_range(1.0..5.0_f64).round()),
            post: Some(rng.gen_range(1.0..5.0_f64).round()),
        };
        SubjectiveRatings {
            sleepiness: pair(),
            neck_fatigue: pair(),
            physical_comfort: pair(),
            mental_effort: pair(),
            physical_effort: pair(),
        }
    }

    /// Cohort where both groups draw gaze from the same distribution — the
    /// null hypothesis holds in every battery cell.
    fn null_cohort(seed: u64, per_group: usize) -> SessionIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut recordings = Vec::new();
        let mut metas = Vec::new();
        for i in 0..per_group * 2 {
            let pid = format!("P{i:03}");
            let fatigued = i % 2 == 1;
            metas.push(meta(&pid, fatigued, uniform_ratings(&mut rng)));
            for task in Task::ALL {
                let samples = (0..150)
                    .map(|k| {
                        let mut s = GazeSample::empty(k as f64 * 4.0);
                        s.lx = Some(rng.gen_range(-2.0..2.0));
                        s.ly = Some(rng.gen_range(-2.0..2.0));
                        s.rx = Some(rng.gen_range(-2.0..2.0));
                        s.ry = Some(rng.gen_range(-2.0..2.0));
                        let p = [
                            rng.gen_range(-0.01..0.01),
                            rng.gen_range(-0.01..0.01),
                            rng.gen_range(-0.01..0.01),
                        ];
                        s.pos_l = Some(p);
                        s.pos_r = Some(p.map(|v| v + 0.06));
                        s
                    })
                    .collect();
                recordings.push(Recording {
                    participant_id: pid.clone(),
                    session_id: "S1".to_string(),
                    task,
                    sample_rate_hz: 250.0,
                    samples,
                });
            }
        }
        index_sessions(recordings, &metas)
    }

    #[test]
    fn variance_battery_has_20_rows_in_fixed_order() {
        let index = null_cohort(11, 4);
        let cells = variance_battery(&index);
        assert_eq!(cells.len(), 20);
        // order: task-major, then eye, then signal
        assert_eq!(cells[0].task, Task::VRG);
        assert_eq!((cells[0].eye, cells[0].signal), (Eye::Left, Signal::Position));
        assert_eq!((cells[1].eye, cells[1].signal), (Eye::Left, Signal::Orientation));
        assert_eq!((cells[2].eye, cells[2].signal), (Eye::Right, Signal::Position));
        assert_eq!(cells[4].task, Task::PUR);
        for c in &cells {
            assert_eq!(c.n_no_fatigue, 4);
            assert_eq!(c.n_fatigue, 4);
            assert!(c.mean_no_fatigue.unwrap() >= 0.0);
            assert!(c.welch.is_ok() && c.pooled.is_ok());
        }
    }

    #[test]
    fn null_cohorts_rarely_reach_significance() {
        // identical group distributions: expect p > 0.01 in at least 18 of
        // the 20 cells for every seed
        for seed in [1u64, 2, 3] {
            let index = null_cohort(seed, 10);
            let cells = variance_battery(&index);
            let calm = cells
                .iter()
                .filter(|c| c.welch.as_ref().map(|r| r.p > 0.01).unwrap_or(false))
                .count();
            assert!(calm >= 18, "seed {seed}: only {calm}/20 cells with p > 0.01");
        }
    }

    #[test]
    fn variance_battery_records_missing_groups_instead_of_panicking() {
        // all participants fatigued → no comparison possible anywhere
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let index = {
            let metas: Vec<SessionMeta> =
                (0..3).map(|i| meta(&format!("P{i}"), true, uniform_ratings(&mut rng))).collect();
            let recordings = metas
                .iter()
                .map(|m| Recording {
                    participant_id: m.participant_id.clone(),
                    session_id: "S1".to_string(),
                    task: Task::TEX,
                    sample_rate_hz: 250.0,
                    samples: (0..50)
                        .map(|k| {
                            let mut s = GazeSample::empty(k as f64 * 4.0);
                            s.lx = Some(k as f64);
                            s.ly = Some(0.5);
                            s
                        })
                        .collect(),
                })
                .collect();
            index_sessions(recordings, &metas)
        };
        let cells = variance_battery(&index);
        assert_eq!(cells.len(), 20);
        for c in &cells {
            assert_eq!(c.n_no_fatigue, 0);
            assert!(c.mean_no_fatigue.is_none());
            assert!(c.welch.is_err());
        }
        // the one populated cell still reports the fatigued group's mean
        let tex_left_orient = cells
            .iter()
            .find(|c| c.task == Task::TEX && c.eye == Eye::Left && c.signal == Signal::Orientation)
            .unwrap();
        assert_eq!(tex_left_orient.n_fatigue, 3);
        assert!(tex_left_orient.mean_fatigue.unwrap() > 0.0);
    }

    #[test]
    fn subjective_battery_emits_five_measures_and_30_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let metas: Vec<SessionMeta> = (0..24)
            .map(|i| meta(&format!("P{i:03}"), i % 2 == 0, uniform_ratings(&mut rng)))
            .collect();
        let battery = subjective_battery(&metas);
        assert_eq!(battery.measures.len(), 5);
        assert!(battery.warnings.is_empty());
        assert_eq!(battery.rows().len(), 30);
        for m in &battery.measures {
            assert_eq!(m.groups[0].group, Group::NoFatigue);
            assert_eq!(m.groups[1].group, Group::Fatigue);
            assert_eq!(m.groups[0].n + m.groups[1].n, 24);
            for g in m.groups {
                assert!((g.delta - (g.post - g.pre)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subjective_sign_conventions_follow_group_and_session_order() {
        // fatigued group rates higher everywhere; everyone increases by 1
        // pre→post except one no-fatigue participant (so paired variance is
        // nonzero); fatigued increase is larger.
        let mut metas = Vec::new();
        for i in 0..8 {
            let fatigued = i >= 4;
            let base = if fatigued { 4.0 } else { 2.0 } + (i % 4) as f64 * 0.1;
            let bump = if fatigued { 2.0 } else { 1.0 } + if i % 4 == 0 { 0.5 } else { 0.0 };
            let pair = PrePost { pre: Some(base), post: Some(base + bump) };
            let ratings = SubjectiveRatings {
                sleepiness: pair,
                neck_fatigue: pair,
                physical_comfort: pair,
                mental_effort: pair,
                physical_effort: pair,
            };
            metas.push(meta(&format!("P{i}"), fatigued, ratings));
        }
        let battery = subjective_battery(&metas);
        let m = &battery.measures[0];
        // no-fatigue − fatigue with fatigued higher ⇒ negative t
        assert!(m.pre_group.as_ref().unwrap().t < 0.0);
        assert!(m.post_group.as_ref().unwrap().t < 0.0);
        // pre − post with post higher ⇒ negative t in both groups
        assert!(m.paired[0].as_ref().unwrap().t < 0.0);
        assert!(m.paired[1].as_ref().unwrap().t < 0.0);
        // Δ = post − pre, fatigued Δ larger ⇒ negative group-Δ t
        assert!(m.delta_group.as_ref().unwrap().t < 0.0);
        assert!(m.groups[1].delta > m.groups[0].delta);
    }

    #[test]
    fn constant_ratings_degenerate_all_tests_but_report_means() {
        let pair = PrePost { pre: Some(3.0), post: Some(3.0) };
        let ratings = SubjectiveRatings {
            sleepiness: pair,
            neck_fatigue: pair,
            physical_comfort: pair,
            mental_effort: pair,
            physical_effort: pair,
        };
        let metas: Vec<SessionMeta> =
            (0..6).map(|i| meta(&format!("P{i}"), i % 2 == 0, ratings.clone())).collect();
        let battery = subjective_battery(&metas);
        assert_eq!(battery.measures.len(), 5);
        for m in &battery.measures {
            assert!(m.pre_group.is_err());
            assert!(m.post_group.is_err());
            assert!(m.paired[0].is_err() && m.paired[1].is_err());
            assert!(m.delta_group.is_err());
            assert_eq!(m.groups[0].pre, 3.0);
            assert_eq!(m.groups[1].post, 3.0);
        }
    }

    #[test]
    fn measures_without_ratings_are_skipped_with_warning() {
        // sleepiness present, everything else absent
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let metas: Vec<SessionMeta> = (0..10)
            .map(|i| {
                let ratings = SubjectiveRatings {
                    sleepiness: PrePost {
                        pre: Some(rng.gen_range(1.0..7.0_f64).round()),
                        post: Some(rng.gen_range(1.0..7.0_f64).round()),
                    },
                    ..SubjectiveRatings::default()
                };
                meta(&format!("P{i}"), i % 2 == 0, ratings)
            })
            .collect();
        let battery = subjective_battery(&metas);
        assert_eq!(battery.measures.len(), 1);
        assert_eq!(battery.measures[0].measure, Measure::Sleepiness);
        assert_eq!(battery.warnings.len(), 4);
        assert!(battery.warnings[0].contains("skipped"));
        assert_eq!(battery.rows().len(), 6);
    }
}
