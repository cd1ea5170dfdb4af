//! Classification metrics: argmax accuracy and the ROC curve with its
//! trapezoidal area.

use ndarray::Array2;

/// Fraction of rows whose argmax class equals the label. Ties between the
/// two class probabilities resolve to class 0 (non-fatigue).
pub fn accuracy(probs: &Array2<f64>, labels: &[bool]) -> f64 {
    assert_eq!(probs.nrows(), labels.len(), "probs/labels length mismatch");
    if labels.is_empty() {
        return 0.0;
    }
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(i, &label)| (probs[[i, 1]] > probs[[i, 0]]) == label)
        .count();
    correct as f64 / labels.len() as f64
}

/// ROC curve from fatigue-class scores: thresholds sweep the unique score
/// values in descending order, with tied scores entering as a group, from
/// (0, 0) to (1, 1). If either class is absent the ranking is undefined and
/// the chance diagonal [(0,0), (1,1)] is returned.
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Vec<(f64, f64)> {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return vec![(0.0, 0.0), (1.0, 1.0)];
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        // consume the whole tie group before emitting a point
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    points
}

/// Trapezoidal area under a piecewise-linear curve given as (x, y) points
/// with non-decreasing x.
pub fn auc(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
        .sum()
}

/// Convenience: ROC points and their AUC in one call.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> (Vec<(f64, f64)>, f64) {
    let points = roc_points(scores, labels);
    let area = auc(&points);
    (points, area)
}

/// O(n²) Mann-Whitney concordance: P(score⁺ > score⁻) + ½·P(tie), the
/// probabilistic definition of AUC. Kept as an independent oracle for the
/// trapezoidal implementation.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return 0.5;
    }
    let mut concordant = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                concordant += 1.0;
            } else if p == n {
                concordant += 0.5;
            }
        }
    }
    concordant / (pos.len() as f64 * neg.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_separation_is_auc_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let (points, a) = roc_auc(&scores, &labels);
        assert_eq!(a, 1.0);
        assert_eq!(points.first(), Some(&(0.0, 0.0)));
        assert_eq!(points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn constant_scores_are_chance() {
        let scores = [0.5; 6];
        let labels = [true, false, true, false, true, false];
        let (points, a) = roc_auc(&scores, &labels);
        assert_eq!(points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!((a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reversed_ranking_is_auc_zero() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [true, true, false, false];
        assert_eq!(roc_auc(&scores, &labels).1, 0.0);
    }

    #[test]
    fn trapezoid_matches_mann_whitney_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for round in 0..25 {
            let n = 5 + rng.gen_range(0..60);
            // coarse quantization forces plenty of ties
            let scores: Vec<f64> =
                (0..n).map(|_| (rng.gen::<f64>() * 8.0).round() / 8.0).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let fast = roc_auc(&scores, &labels).1;
            let slow = mann_whitney_auc(&scores, &labels);
            assert!((fast - slow).abs() < 1e-12, "round {round}: {fast} vs {slow}");
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let scores: Vec<f64> = (0..80).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<bool> = (0..80).map(|_| rng.gen_bool(0.5)).collect();
        let base = roc_auc(&scores, &labels).1;
        let logit: Vec<f64> = scores.iter().map(|&s| (s / (1.0 - s)).ln()).collect();
        let scaled: Vec<f64> = scores.iter().map(|&s| 3.0 * s + 10.0).collect();
        assert!((roc_auc(&logit, &labels).1 - base).abs() < 1e-12);
        assert!((roc_auc(&scaled, &labels).1 - base).abs() < 1e-12);
    }

    #[test]
    fn roc_points_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let scores: Vec<f64> = (0..50).map(|_| (rng.gen::<f64>() * 4.0).round()).collect();
        let labels: Vec<bool> = (0..50).map(|_| rng.gen_bool(0.5)).collect();
        let points = roc_points(&scores, &labels);
        for w in points.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        assert_eq!(points[0], (0.0, 0.0));
        assert_eq!(*points.last().unwrap(), (1.0, 1.0));
    }

    #[test]
    fn accuracy_counts_argmax_matches() {
        let probs = array![[0.9, 0.1], [0.3, 0.7], [0.6, 0.4], [0.2, 0.8]];
        let labels = [false, true, true, true];
        assert!((accuracy(&probs, &labels) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn constant_predictor_scores_majority_fraction() {
        // 0.5/0.5 ties resolve to class 0, so accuracy = non-fatigue fraction
        let labels = [false, false, false, true, true];
        let probs = Array2::from_elem((labels.len(), 2), 0.5);
        assert!((accuracy(&probs, &labels) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn single_class_sets_fall_back_to_diagonal() {
        let scores = [0.3, 0.9, 0.4];
        assert_eq!(roc_points(&scores, &[true, true, true]), vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc_auc(&scores, &[false, false, false]).1, 0.5);
    }
}
