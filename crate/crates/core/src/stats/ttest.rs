//! Paired and two-sample Student t-tests with two-sided p-values.
//!
//! Sign conventions used throughout the crate:
//! - `paired_t(a, b)` tests the mean of `a − b` against zero, so calling it
//!   with (pre, post) yields a negative t when values increase over the
//!   session.
//! - `two_sample_t(a, b, ..)` tests `mean(a) − mean(b)`, so calling it with
//!   (non-fatigued, fatigued) yields a negative t when the fatigued group
//!   scores higher.

use serde::{Deserialize, Serialize};

use super::dist::t_two_sided_p;
use super::StatsError;

/// Which test produced a [`StatResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "PAIRED_T")]
    PairedT,
    #[serde(rename = "TWO_SAMPLE_T")]
    TwoSampleT,
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestKind::PairedT => write!(f, "PAIRED_T"),
            TestKind::TwoSampleT => write!(f, "TWO_SAMPLE_T"),
        }
    }
}

/// Outcome of a t-test: the statistic, its two-sided p-value, the degrees of
/// freedom used (fractional for Welch), and the group sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub kind: TestKind,
    pub t: f64,
    pub p: f64,
    pub df: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Sample mean.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n−1) sample variance, two-pass for numerical stability.
pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Paired t-test on the differences `a[i] − b[i]`.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<StatResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::DegenerateTest(format!(
            "paired t-test needs at least 2 pairs, got {n}"
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let var = sample_variance(&d);
    if var <= 0.0 {
        return Err(StatsError::DegenerateTest(
            "paired differences have zero variance".to_string(),
        ));
    }
    let df = (n - 1) as f64;
    let t = mean(&d) / (var / n as f64).sqrt();
    Ok(StatResult { kind: TestKind::PairedT, t, p: t_two_sided_p(t, df), df, n_a: n, n_b: n })
}

/// Two-sample t-test on `mean(a) − mean(b)`. With `equal_var = false` (the
/// default choice in this crate) the Welch statistic and Welch–Satterthwaite
/// degrees of freedom are used; with `equal_var = true` the classic pooled
/// form with `n_a + n_b − 2` degrees of freedom is used.
pub fn two_sample_t(a: &[f64], b: &[f64], equal_var: bool) -> Result<StatResult, StatsError> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(StatsError::DegenerateTest(format!(
            "two-sample t-test needs at least 2 values per group, got {na} and {nb}"
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if va <= 0.0 && vb <= 0.0 {
        return Err(StatsError::DegenerateTest(
            "both groups have zero variance".to_string(),
        ));
    }
    let (na_f, nb_f) = (na as f64, nb as f64);
    let (t, df) = if equal_var {
        let df = na_f + nb_f - 2.0;
        let pooled = ((na_f - 1.0) * va + (nb_f - 1.0) * vb) / df;
        let t = (ma - mb) / (pooled * (1.0 / na_f + 1.0 / nb_f)).sqrt();
        (t, df)
    } else {
        let sa = va / na_f;
        let sb = vb / nb_f;
        let t = (ma - mb) / (sa + sb).sqrt();
        let df = (sa + sb) * (sa + sb)
            / (sa * sa / (na_f - 1.0) + sb * sb / (nb_f - 1.0));
        (t, df)
    };
    Ok(StatResult { kind: TestKind::TwoSampleT, t, p: t_two_sided_p(t, df), df, n_a: na, n_b: nb })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Deserialize)]
    #[serde(tag = "kind", rename_all = "snake_case")]
    enum OracleCase {
        Paired { a: Vec<f64>, b: Vec<f64>, t: f64, p: f64, df: f64 },
        TwoSample {
            a: Vec<f64>,
            b: Vec<f64>,
            welch_t: f64,
            welch_p: f64,
            welch_df: f64,
            pooled_t: f64,
            pooled_p: f64,
            pooled_df: f64,
        },
    }

    fn close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol * want.abs().max(1.0),
            "{what}: got {got}, want {want}"
        );
    }

    #[test]
    fn matches_frozen_oracle_within_1e9() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/ttest_oracle.json");
        let text = std::fs::read_to_string(path).expect("oracle fixture present");
        let cases: Vec<OracleCase> = serde_json::from_str(&text).expect("valid fixture JSON");
        assert_eq!(cases.len(), 20);
        for (i, case) in cases.iter().enumerate() {
            match case {
                OracleCase::Paired { a, b, t, p, df } => {
                    let r = paired_t(a, b).unwrap();
                    close(r.t, *t, 1e-9, &format!("case {i} paired t"));
                    close(r.p, *p, 1e-9, &format!("case {i} paired p"));
                    close(r.df, *df, 1e-9, &format!("case {i} paired df"));
                    assert_eq!(r.kind, TestKind::PairedT);
                }
                OracleCase::TwoSample {
                    a,
                    b,
                    welch_t,
                    welch_p,
                    welch_df,
                    pooled_t,
                    pooled_p,
                    pooled_df,
                } => {
                    let w = two_sample_t(a, b, false).unwrap();
                    close(w.t, *welch_t, 1e-9, &format!("case {i} welch t"));
                    close(w.p, *welch_p, 1e-9, &format!("case {i} welch p"));
                    close(w.df, *welch_df, 1e-9, &format!("case {i} welch df"));
                    let pl = two_sample_t(a, b, true).unwrap();
                    close(pl.t, *pooled_t, 1e-9, &format!("case {i} pooled t"));
                    close(pl.p, *pooled_p, 1e-9, &format!("case {i} pooled p"));
                    close(pl.df, *pooled_df, 1e-9, &format!("case {i} pooled df"));
                    assert_eq!(w.n_a, a.len());
                    assert_eq!(w.n_b, b.len());
                }
            }
        }
    }

    #[test]
    fn two_sample_is_antisymmetric() {
        let a = [1.2, 3.4, 2.2, 5.1, 4.0];
        let b = [0.7, 1.9, 2.5, 1.1];
        for equal_var in [false, true] {
            let ab = two_sample_t(&a, &b, equal_var).unwrap();
            let ba = two_sample_t(&b, &a, equal_var).unwrap();
            assert_eq!(ab.t.to_bits(), (-ba.t).to_bits());
            assert_eq!(ab.df.to_bits(), ba.df.to_bits());
            assert_eq!(ab.p.to_bits(), ba.p.to_bits());
        }
    }

    #[test]
    fn paired_sign_convention_is_a_minus_b() {
        // b uniformly larger than a ⇒ negative t
        let pre = [1.0, 2.0, 1.5, 1.2];
        let post = [2.0, 2.5, 2.4, 2.0];
        let r = paired_t(&pre, &post).unwrap();
        assert!(r.t < 0.0);
        assert_eq!(r.df, 3.0);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(
            paired_t(&[1.0, 2.0], &[1.0]),
            Err(StatsError::LengthMismatch { left: 2, right: 1 })
        ));
        assert!(matches!(paired_t(&[1.0], &[2.0]), Err(StatsError::DegenerateTest(_))));
        // identical shifts ⇒ zero-variance differences
        assert!(matches!(
            paired_t(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]),
            Err(StatsError::DegenerateTest(_))
        ));
        assert!(matches!(
            two_sample_t(&[1.0], &[2.0, 3.0], false),
            Err(StatsError::DegenerateTest(_))
        ));
        assert!(matches!(
            two_sample_t(&[5.0, 5.0], &[3.0, 3.0], false),
            Err(StatsError::DegenerateTest(_))
        ));
    }

    #[test]
    fn pooled_and_welch_agree_for_balanced_equal_variance_groups() {
        // equal group sizes make the Welch statistic identical to pooled
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 3.0, 4.0, 5.0];
        let w = two_sample_t(&a, &b, false).unwrap();
        let p = two_sample_t(&a, &b, true).unwrap();
        assert!((w.t - p.t).abs() < 1e-12);
        // equal sample variances additionally align the degrees of freedom
        assert!((w.df - p.df).abs() < 1e-9);
    }

    #[test]
    fn kind_serializes_to_screaming_case() {
        assert_eq!(serde_json::to_string(&TestKind::PairedT).unwrap(), "\"PAIRED_T\"");
        assert_eq!(serde_json::to_string(&TestKind::TwoSampleT).unwrap(), "\"TWO_SAMPLE_T\"");
    }
}
