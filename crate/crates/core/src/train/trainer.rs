//! Mini-batch training loop and held-out evaluation.

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::metrics::{accuracy, roc_auc};
use super::optim::{Optimizer, OptimizerKind};
use super::TrainError;
use crate::ingest::Task;
use crate::nn::graph::Mode;
use crate::nn::{Model, ModelKind, NnError};
use crate::preprocess::{ChannelConfig, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Fraction of participants (not windows) assigned to training.
    pub split_fraction: f64,
    /// Stratify the user split by fatigue label.
    pub stratify: bool,
    pub channels: ChannelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            split_fraction: 0.8,
            stratify: true,
            channels: ChannelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs < 1 {
            return Err(TrainError::Input("epochs must be ≥ 1".into()));
        }
        if self.batch_size < 1 {
            return Err(TrainError::Input("batch_size must be ≥ 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(TrainError::Input(format!(
                "split_fraction {} outside (0, 1)",
                self.split_fraction
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(TrainError::Input(format!(
                "learning_rate {} must be finite and ≥ 0",
                self.learning_rate
            )));
        }
        self.channels
            .validate()
            .map_err(|e| TrainError::Input(e.to_string()))?;
        Ok(())
    }
}

/// Per-cell evaluation record; one grid cell produces one of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub task: Task,
    pub model: ModelKind,
    pub duration_s: u32,
    /// Window-level argmax accuracy.
    pub accuracy: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub auc: f64,
    pub n_test_windows: usize,
    pub n_test_participants: usize,
    /// Supplementary participant-level accuracy (mean fatigue probability
    /// over each participant's windows, thresholded at 0.5).
    pub participant_accuracy: f64,
    pub seed: u64,
    pub config_hash: String,
}

fn assemble_batch(windows: &[Window], idxs: &[usize]) -> (Array3<f64>, Vec<bool>) {
    let (c, t) = windows[idxs[0]].data.dim();
    let mut x = Array3::<f64>::zeros((idxs.len(), c, t));
    let mut labels = Vec::with_capacity(idxs.len());
    for (row, &i) in idxs.iter().enumerate() {
        x.index_axis_mut(ndarray::Axis(0), row).assign(&windows[i].data);
        labels.push(windows[i].label);
    }
    (x, labels)
}

fn check_uniform(windows: &[Window], model: &Model) -> Result<(), TrainError> {
    let d0 = windows[0].duration_s;
    for w in windows {
        if w.duration_s != d0 {
            return Err(TrainError::Input(format!(
                "mixed window durations: {} s and {} s",
                d0, w.duration_s
            )));
        }
        let (c, t) = w.data.dim();
        if c != model.spec.in_channels || t != model.spec.input_len {
            return Err(TrainError::Input(format!(
                "window shape ({c}, {t}) does not match model input ({}, {})",
                model.spec.in_channels, model.spec.input_len
            )));
        }
    }
    Ok(())
}

/// Trains `model` in place and returns the per-epoch mean loss curve.
///
/// The batch order is a seeded shuffle of the window indices computed once
/// and reused every epoch, so the trajectory is a deterministic function of
/// (model spec, seed, window order) and a zero learning rate yields a
/// constant loss curve.
pub fn train(
    model: &mut Model,
    train_windows: &[Window],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    train_with(model, train_windows, cfg, |_, _, _| Ok(false))
}

/// [`train`] with a per-epoch hook, called after each epoch with the epoch
/// index, that epoch's mean loss, and the model. Returning `Ok(true)` stops
/// training early; the returned curve then covers only the completed epochs.
/// The hook may evaluate the model (switching it to eval mode); training mode
/// is restored before the next epoch. The grid protocol always runs the full
/// epoch budget and does not use the hook.
pub fn train_with(
    model: &mut Model,
    train_windows: &[Window],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, &mut Model) -> Result<bool, TrainError>,
) -> Result<Vec<f64>, TrainError> {
    cfg.validate()?;
    if train_windows.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    check_uniform(train_windows, model)?;

    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);

    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &model.params);
    let n = train_windows.len() as f64;
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        model.set_mode(Mode::Train);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, labels) = assemble_batch(train_windows, chunk);
            let (grads, loss) = match model.backward(&x, &labels) {
                Ok(v) => v,
                Err(NnError::NonFiniteGradient { param }) => {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        detail: format!("non-finite gradient in `{param}`"),
                    })
                }
                Err(e) => return Err(e.into()),
            };
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    detail: format!("batch loss {loss}"),
                });
            }
            opt.step(&mut model.params, &grads);
            epoch_loss += loss * chunk.len() as f64;
        }
        let mean = epoch_loss / n;
        curve.push(mean);
        if on_epoch(epoch, mean, model)? {
            break;
        }
    }
    Ok(curve)
}

/// Chunked eval-mode forward over a window set; returns per-window fatigue
/// probabilities.
fn predict(model: &mut Model, windows: &[Window]) -> Result<Vec<f64>, TrainError> {
    const EVAL_BATCH: usize = 64;
    model.set_mode(Mode::Eval);
    let idxs: Vec<usize> = (0..windows.len()).collect();
    let mut scores = Vec::with_capacity(windows.len());
    for chunk in idxs.chunks(EVAL_BATCH) {
        let (x, _) = assemble_batch(windows, chunk);
        let probs = model.forward(&x)?;
        scores.extend(probs.column(1).iter().copied());
    }
    Ok(scores)
}

pub(crate) fn participant_level_accuracy(
    ids: &[&str],
    labels: &[bool],
    scores: &[f64],
) -> (usize, f64) {
    let mut per: BTreeMap<&str, (bool, f64, usize)> = BTreeMap::new();
    for ((id, &label), &score) in ids.iter().zip(labels).zip(scores) {
        let e = per.entry(id).or_insert((label, 0.0, 0));
        e.1 += score;
        e.2 += 1;
    }
    let n = per.len();
    let correct = per
        .values()
        .filter(|(label, sum, count)| (sum / *count as f64 > 0.5) == *label)
        .count();
    (n, correct as f64 / n as f64)
}

/// Evaluates a model on held-out windows: switches it to eval mode, computes
/// window-level argmax accuracy, the ROC over fatigue-class probabilities,
/// trapezoidal AUC, and the supplementary participant-level accuracy.
/// `seed` is taken from the model spec; `config_hash` is left empty for the
/// caller (the grid runner stamps it).
pub fn evaluate(model: &mut Model, test_windows: &[Window]) -> Result<EvalResult, TrainError> {
    if test_windows.is_empty() {
        return Err(TrainError::EmptyTestSet);
    }
    check_uniform(test_windows, model)?;
    let task = test_windows[0].task;
    if test_windows.iter().any(|w| w.task != task) {
        return Err(TrainError::Input("mixed tasks in test set".into()));
    }

    let scores = predict(model, test_windows)?;
    let labels: Vec<bool> = test_windows.iter().map(|w| w.label).collect();
    let probs = ndarray::Array2::from_shape_fn((scores.len(), 2), |(i, c)| {
        if c == 1 {
            scores[i]
        } else {
            1.0 - scores[i]
        }
    });
    let acc = accuracy(&probs, &labels);
    let (roc, area) = roc_auc(&scores, &labels);
    let ids: Vec<&str> = test_windows.iter().map(|w| w.participant_id.as_str()).collect();
    let (n_participants, participant_acc) = participant_level_accuracy(&ids, &labels, &scores);

    Ok(EvalResult {
        task,
        model: model.spec.kind,
        duration_s: test_windows[0].duration_s,
        accuracy: acc,
        roc_points: roc,
        auc: area,
        n_test_windows: test_windows.len(),
        n_test_participants: n_participants,
        participant_accuracy: participant_acc,
        seed: model.spec.seed,
        config_hash: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_model, ModelSpec};
    use ndarray::Array2;
    use rand::Rng;

    /// Two linearly separable classes: class means ±shift on every channel
    /// plus small noise. `L` must satisfy the builders' minimum of 8.
    fn separable_windows(n_per_class: usize, len: usize, shift: f64, seed: u64) -> Vec<Window> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for label in [false, true] {
            let mean = if label { shift } else { -shift };
            for i in 0..n_per_class {
                let data =
                    Array2::from_shape_fn((4, len), |_| mean + 0.3 * (rng.gen::<f64>() - 0.5));
                out.push(Window {
                    participant_id: format!("{}{i:02}", if label { "F" } else { "N" }),
                    task: Task::PUR,
                    label,
                    start_ms: 0.0,
                    duration_s: 5,
                    data,
                });
            }
        }
        out
    }

    fn small_cfg(epochs: usize, lr: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 8,
            learning_rate: lr,
            seed,
            ..TrainConfig::default()
        }
    }

    /// 1-D logistic regression on the per-window mean: an independent check
    /// that the synthetic set really is linearly separable.
    fn logistic_regression_separates(windows: &[Window]) -> bool {
        let feats: Vec<f64> = windows.iter().map(|w| w.data.mean().unwrap()).collect();
        let labels: Vec<f64> = windows.iter().map(|w| w.label as u8 as f64).collect();
        let (mut w, mut b) = (0.0, 0.0);
        for _ in 0..2000 {
            let (mut gw, mut gb) = (0.0, 0.0);
            for (&f, &y) in feats.iter().zip(&labels) {
                let p = 1.0 / (1.0 + (-(w * f + b)).exp());
                gw += (p - y) * f;
                gb += p - y;
            }
            w -= 0.5 * gw / feats.len() as f64;
            b -= 0.5 * gb / feats.len() as f64;
        }
        feats
            .iter()
            .zip(&labels)
            .all(|(&f, &y)| ((w * f + b > 0.0) as u8 as f64) == y)
    }

    #[test]
    fn every_architecture_fits_separable_data() {
        let windows = separable_windows(12, 16, 0.8, 3);
        assert!(logistic_regression_separates(&windows), "oracle: set must be separable");
        for kind in ModelKind::ALL {
            let mut model = build_model(&ModelSpec::new(kind, 16, 5)).unwrap();
            let curve = train(&mut model, &windows, &small_cfg(60, 1e-3, 11)).unwrap();
            assert!(
                curve.last().unwrap() < curve.first().unwrap(),
                "{kind}: loss did not decrease"
            );
            let scores = predict(&mut model, &windows).unwrap();
            let correct = windows
                .iter()
                .zip(&scores)
                .filter(|(w, &s)| (s > 0.5) == w.label)
                .count();
            let acc = correct as f64 / windows.len() as f64;
            assert!(acc >= 0.99, "{kind}: train accuracy {acc}");
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters_and_loss() {
        let windows = separable_windows(6, 16, 0.5, 7);
        let mut model = build_model(&ModelSpec::new(ModelKind::TCN, 16, 2)).unwrap();
        let before: Vec<u64> = model
            .params
            .iter()
            .flat_map(|p| p.value.as_slice().iter().map(|v| v.to_bits()))
            .collect();
        let curve = train(&mut model, &windows, &small_cfg(5, 0.0, 1)).unwrap();
        let after: Vec<u64> = model
            .params
            .iter()
            .flat_map(|p| p.value.as_slice().iter().map(|v| v.to_bits()))
            .collect();
        assert_eq!(before, after, "parameters moved with lr = 0");
        for &l in &curve {
            assert_eq!(l.to_bits(), curve[0].to_bits(), "loss curve not constant");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let windows = separable_windows(6, 16, 0.5, 9);
        let run = || {
            let mut model = build_model(&ModelSpec::new(ModelKind::FCN, 16, 4)).unwrap();
            train(&mut model, &windows, &small_cfg(4, 1e-3, 13)).unwrap()
        };
        let (a, b) = (run(), run());
        let bits = |c: &[f64]| c.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn cloned_window_data_reproduces_the_trajectory() {
        let windows = separable_windows(6, 16, 0.5, 21);
        let copies: Vec<Window> = windows.to_vec();
        let cfg = small_cfg(3, 1e-3, 17);
        let mut m1 = build_model(&ModelSpec::new(ModelKind::TCN, 16, 6)).unwrap();
        let mut m2 = build_model(&ModelSpec::new(ModelKind::TCN, 16, 6)).unwrap();
        let c1 = train(&mut m1, &windows, &cfg).unwrap();
        let c2 = train(&mut m2, &copies, &cfg).unwrap();
        assert_eq!(
            c1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            c2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn doubled_windows_with_preserved_batches_match_closely() {
        // one batch per epoch keeps batch composition identical, so the mean
        // loss/gradient agree up to floating-point summation order
        let windows = separable_windows(4, 16, 0.5, 23);
        let mut doubled = windows.clone();
        doubled.extend(windows.iter().cloned());
        let mut cfg = small_cfg(4, 1e-3, 19);
        cfg.batch_size = windows.len();
        let mut cfg2 = cfg.clone();
        cfg2.batch_size = doubled.len();
        let mut m1 = build_model(&ModelSpec::new(ModelKind::TCN, 16, 8)).unwrap();
        let mut m2 = build_model(&ModelSpec::new(ModelKind::TCN, 16, 8)).unwrap();
        let c1 = train(&mut m1, &windows, &cfg).unwrap();
        let c2 = train(&mut m2, &doubled, &cfg2).unwrap();
        for (a, b) in c1.iter().zip(&c2) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn epoch_hook_stops_training_early_and_matches_full_run_prefix() {
        let windows = separable_windows(6, 16, 0.5, 9);
        let cfg = small_cfg(6, 1e-3, 13);
        let mut full = build_model(&ModelSpec::new(ModelKind::FCN, 16, 4)).unwrap();
        let full_curve = train(&mut full, &windows, &cfg).unwrap();
        let mut stopped = build_model(&ModelSpec::new(ModelKind::FCN, 16, 4)).unwrap();
        let curve = train_with(&mut stopped, &windows, &cfg, |epoch, _, model| {
            // an eval-mode pass inside the hook must not disturb training
            let _ = predict(model, &windows).unwrap();
            Ok(epoch == 2)
        })
        .unwrap();
        assert_eq!(curve.len(), 3);
        let bits = |c: &[f64]| c.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&curve), bits(&full_curve[..3]));
    }

    #[test]
    fn empty_sets_are_rejected() {
        let mut model = build_model(&ModelSpec::new(ModelKind::TCN, 16, 0)).unwrap();
        assert!(matches!(
            train(&mut model, &[], &small_cfg(1, 1e-3, 0)),
            Err(TrainError::EmptyTrainingSet)
        ));
        assert!(matches!(evaluate(&mut model, &[]), Err(TrainError::EmptyTestSet)));
    }

    #[test]
    fn exploding_training_reports_non_finite_loss() {
        // batch norm, the probability clamp, and max-subtracted softmax keep
        // most divergence finite; overflowing f64 range itself requires an
        // absurd step, which is exactly the failure the guard is for
        let windows = separable_windows(6, 16, 0.5, 31);
        let mut model = build_model(&ModelSpec::new(ModelKind::TCN, 16, 1)).unwrap();
        let mut cfg = small_cfg(50, 1e150, 3);
        cfg.optimizer = OptimizerKind::SgdMomentum;
        match train(&mut model, &windows, &cfg) {
            Err(TrainError::NonFiniteLoss { .. }) => {}
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn evaluate_fills_every_field() {
        let windows = separable_windows(8, 16, 0.8, 41);
        let mut model = build_model(&ModelSpec::new(ModelKind::FCN, 16, 77)).unwrap();
        train(&mut model, &windows, &small_cfg(40, 1e-3, 5)).unwrap();
        let held_out = separable_windows(4, 16, 0.8, 42);
        let res = evaluate(&mut model, &held_out).unwrap();
        assert_eq!(res.task, Task::PUR);
        assert_eq!(res.model, ModelKind::FCN);
        assert_eq!(res.duration_s, 5);
        assert_eq!(res.n_test_windows, 8);
        assert_eq!(res.n_test_participants, 8);
        assert_eq!(res.seed, 77);
        assert!(res.accuracy >= 0.9, "accuracy {}", res.accuracy);
        assert!(res.auc >= 0.9 && res.auc <= 1.0, "auc {}", res.auc);
        assert_eq!(res.roc_points.first(), Some(&(0.0, 0.0)));
        assert_eq!(res.roc_points.last(), Some(&(1.0, 1.0)));
        assert!(res.participant_accuracy >= 0.9);
    }

    #[test]
    fn mixed_durations_are_rejected() {
        let mut windows = separable_windows(4, 16, 0.5, 51);
        windows[0].duration_s = 10;
        let mut model = build_model(&ModelSpec::new(ModelKind::TCN, 16, 0)).unwrap();
        assert!(matches!(
            train(&mut model, &windows, &small_cfg(1, 1e-3, 0)),
            Err(TrainError::Input(_))
        ));
    }

    #[test]
    fn participant_votes_pool_window_scores() {
        let ids = ["a", "a", "a", "b", "b", "c"];
        let labels = [true, true, true, false, false, true];
        // participant a: mean 0.6 → fatigue ✓; b: mean 0.3 → non ✓; c: 0.2 → ✗
        let scores = [0.9, 0.5, 0.4, 0.2, 0.4, 0.2];
        let (n, acc) = participant_level_accuracy(&ids, &labels, &scores);
        assert_eq!(n, 3);
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
    }
}
