//! Student-t tail probabilities via the log-gamma function (Lanczos
//! approximation) and the regularized incomplete beta function (modified
//! Lentz continued fraction), accurate to well under 1e-10 relative error —
//! no statistics dependency needed for a two-sided p-value.

/// Lanczos g = 7, n = 9 coefficients (Boost/GSL-standard set).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0, x ∈ [0, 1],
/// by the modified Lentz continued-fraction evaluation with the symmetry
/// transform applied where the fraction converges fastest.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "inc_beta requires positive shape parameters");
    assert!((0.0..=1.0).contains(&x), "inc_beta requires x in [0, 1]");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - inc_beta(b, a, 1.0 - x);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let front = ln_front.exp() / a;

    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let mut f = 1.0f64;
    let mut c = 1.0f64;
    let mut d = 0.0f64;
    for i in 0..=300usize {
        let m = (i / 2) as f64;
        let numerator = if i == 0 {
            1.0
        } else if i % 2 == 0 {
            m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m))
        } else {
            -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0))
        };
        d = 1.0 + numerator * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + numerator / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            return front * (f - 1.0);
        }
    }
    front * (f - 1.0) // converged to working precision in practice
}

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom:
/// p = I_{df/(df+t²)}(df/2, 1/2).
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    inc_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // references computed with a 40-digit arbitrary-precision evaluation
    #[test]
    fn ln_gamma_matches_high_precision_references() {
        let cases = [
            (0.5, 0.572_364_942_924_700_087_07),
            (1.0, 0.0),
            (2.5, 0.284_682_870_472_919_159_63),
            (5.0, 3.178_053_830_347_945_619_6),
            (10.3, 13.482_036_786_138_356_971),
            (0.1, 2.252_712_651_734_205_959_9),
        ];
        for (x, expected) in cases {
            let got = ln_gamma(x);
            assert!(
                (got - expected).abs() <= expected.abs().max(1.0) * 1e-13,
                "ln_gamma({x}) = {got}, want {expected}"
            );
        }
    }

    #[test]
    fn ln_gamma_satisfies_recurrence() {
        // Γ(x+1) = x·Γ(x) ⇔ lnΓ(x+1) = ln x + lnΓ(x)
        for x in [0.2, 0.7, 1.3, 4.5, 17.0, 120.5] {
            let lhs = ln_gamma(x + 1.0);
            let rhs = x.ln() + ln_gamma(x);
            assert!((lhs - rhs).abs() < lhs.abs().max(1.0) * 1e-12, "x = {x}");
        }
    }

    #[test]
    fn inc_beta_matches_high_precision_references() {
        let cases = [
            (2.0, 3.0, 0.3, 0.3483),
            (0.5, 0.5, 0.7, 0.630_989_880_434_454_617_24),
            (5.0, 1.5, 0.42, 0.028_494_856_959_671_902_231),
            (10.0, 2.0, 0.9, 0.697_356_880_2),
            (0.5, 8.0, 0.05, 0.627_578_271_933_152_407_12),
        ];
        for (a, b, x, expected) in cases {
            let got = inc_beta(a, b, x);
            assert!(
                (got - expected).abs() <= expected * 1e-10,
                "I_{x}({a},{b}) = {got}, want {expected}"
            );
        }
    }

    #[test]
    fn inc_beta_analytic_identities() {
        for x in [0.0, 0.05, 0.33, 0.5, 0.77, 1.0] {
            // I_x(1,1) = x
            assert!((inc_beta(1.0, 1.0, x) - x).abs() < 1e-14);
            // I_x(2,2) = x²(3−2x)
            let expected = x * x * (3.0 - 2.0 * x);
            assert!((inc_beta(2.0, 2.0, x) - expected).abs() < 1e-13);
            // symmetry: I_x(a,b) = 1 − I_{1−x}(b,a)
            let s = inc_beta(3.7, 1.9, x) + inc_beta(1.9, 3.7, 1.0 - x);
            assert!((s - 1.0).abs() < 1e-13, "x = {x}: {s}");
        }
    }

    #[test]
    fn t_p_values_match_references() {
        let cases = [
            (2.0, 10.0, 0.073_388_034_770_740_365_618),
            (0.5, 3.0, 0.651_447_964_848_150_994_44),
            (4.2, 28.344, 2.404_787_465_324_551_851_6e-4),
            (1.0, 1.0, 0.5),
            (6.26, 405.0, 9.821_724_108_075_843_688_4e-10),
        ];
        for (t, df, expected) in cases {
            let got = t_two_sided_p(t, df);
            assert!(
                (got - expected).abs() <= expected * 1e-9 + 1e-300,
                "p(t={t}, df={df}) = {got}, want {expected}"
            );
            // two-sided p is symmetric in the sign of t
            assert_eq!(got.to_bits(), t_two_sided_p(-t, df).to_bits());
        }
    }

    #[test]
    fn t_zero_gives_p_one() {
        for df in [1.0, 2.0, 10.0, 100.0] {
            assert!((t_two_sided_p(0.0, df) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn p_decreases_as_t_grows() {
        let mut last = 1.0;
        for i in 1..40 {
            let p = t_two_sided_p(i as f64 * 0.25, 12.0);
            assert!(p < last, "p not decreasing at t = {}", i as f64 * 0.25);
            last = p;
        }
    }
}
