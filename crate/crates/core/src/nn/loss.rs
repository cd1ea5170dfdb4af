//! Binary cross-entropy over the fatigue-class probability.

use ndarray::Array2;

use super::NnError;

/// Probabilities are clamped into [CLAMP, 1 − CLAMP] before the logarithm.
pub const CLAMP: f64 = 1e-7;

fn check_shapes(probs: &Array2<f64>, labels: &[bool]) -> Result<(), NnError> {
    if probs.ncols() != 2 || probs.nrows() != labels.len() || labels.is_empty() {
        return Err(NnError::ShapeMismatch {
            expected: format!("probs ({}, 2) with matching labels", labels.len()),
            got: format!("probs {:?}, {} labels", probs.dim(), labels.len()),
        });
    }
    Ok(())
}

/// Mean over the batch of −[g·ln p₁ + (1−g)·ln(1−p₁)], where p₁ is column 1
/// (the fatigue class) and g ∈ {0, 1}.
pub fn bce_loss(probs: &Array2<f64>, labels: &[bool]) -> Result<f64, NnError> {
    check_shapes(probs, labels)?;
    let mut total = 0.0;
    for (row, &label) in probs.rows().into_iter().zip(labels) {
        let p1 = row[1].clamp(CLAMP, 1.0 - CLAMP);
        total -= if label { p1.ln() } else { (1.0 - p1).ln() };
    }
    Ok(total / labels.len() as f64)
}

/// Loss plus its gradient with respect to the probability matrix. Where the
/// clamp binds, the gradient is zero (the clamped value is locally constant).
pub fn bce_grad(probs: &Array2<f64>, labels: &[bool]) -> Result<(f64, Array2<f64>), NnError> {
    check_shapes(probs, labels)?;
    let batch = labels.len() as f64;
    let mut dprobs = Array2::<f64>::zeros(probs.raw_dim());
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let p1_raw = probs[[i, 1]];
        let p1 = p1_raw.clamp(CLAMP, 1.0 - CLAMP);
        total -= if label { p1.ln() } else { (1.0 - p1).ln() };
        if p1_raw > CLAMP && p1_raw < 1.0 - CLAMP {
            dprobs[[i, 1]] = if label { -1.0 / p1 } else { 1.0 / (1.0 - p1) } / batch;
        }
    }
    Ok((total / batch, dprobs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn coin_flip_probability_costs_ln_two() {
        let probs = array![[0.5, 0.5], [0.5, 0.5]];
        let loss = bce_loss(&probs, &[true, false]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let probs = array![[0.0, 1.0]];
        let loss = bce_loss(&probs, &[true]).unwrap();
        assert!(loss > 0.0 && loss < 1.1e-7); // clamped at 1e-7
    }

    #[test]
    fn matches_naive_scalar_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(1..40);
            let mut probs = Array2::<f64>::zeros((n, 2));
            let mut labels = Vec::new();
            for i in 0..n {
                let p1: f64 = rng.gen();
                probs[[i, 0]] = 1.0 - p1;
                probs[[i, 1]] = p1;
                labels.push(rng.gen::<bool>());
            }
            let mut expected = 0.0;
            for i in 0..n {
                let p = probs[[i, 1]].clamp(CLAMP, 1.0 - CLAMP);
                expected += if labels[i] { -p.ln() } else { -(1.0 - p).ln() };
            }
            expected /= n as f64;
            let got = bce_loss(&probs, &labels).unwrap();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let probs = array![[0.3, 0.7], [0.8, 0.2], [0.45, 0.55]];
        let labels = [true, false, true];
        let (_, grad) = bce_grad(&probs, &labels).unwrap();
        let eps = 1e-7;
        for i in 0..3 {
            let mut pp = probs.clone();
            pp[[i, 1]] += eps;
            let mut pm = probs.clone();
            pm[[i, 1]] -= eps;
            let fd = (bce_loss(&pp, &labels).unwrap() - bce_loss(&pm, &labels).unwrap()) / (2.0 * eps);
            assert!((grad[[i, 1]] - fd).abs() < 1e-6, "row {i}: {} vs {fd}", grad[[i, 1]]);
            assert_eq!(grad[[i, 0]], 0.0);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let probs = array![[0.5, 0.5]];
        assert!(matches!(
            bce_loss(&probs, &[true, false]),
            Err(NnError::ShapeMismatch { .. })
        ));
    }
}
