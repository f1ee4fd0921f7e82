//! Paired t-test and distribution summaries.
//!
//! Student-t tail probabilities come from the regularized incomplete beta
//! function, evaluated with the modified Lentz continued fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta (Numerical Recipes `betacf`).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`, given both `x` and `1 - x` so
/// callers can pass a complement computed without cancellation.
fn inc_beta_split(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * one_minus_x.ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b
    }
}

/// Regularized incomplete beta function `I_x(a, b)` for `x` in [0, 1].
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    inc_beta_split(a, b, x.clamp(0.0, 1.0), (1.0 - x).clamp(0.0, 1.0))
}

/// Two-sided tail probability `P(|T| >= |t|)` of Student's t with `df`
/// degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let denom = df + t2;
    inc_beta_split(df / 2.0, 0.5, df / denom, t2 / denom).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    /// Two-sided.
    pub p_value: f64,
    pub n_pairs: usize,
}

/// Paired two-sided t-test on `x[i] - y[i]`.
///
/// All-zero differences give `t = 0, p = 1`. Constant nonzero differences
/// have zero spread; they give an infinite `t` and `p = 0`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TTestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let df = n - 1;
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTestResult {
            t_statistic: 0.0,
            degrees_of_freedom: df,
            p_value: 1.0,
            n_pairs: n,
        });
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / df as f64;
    let se = (var / n as f64).sqrt();
    let t = if se == 0.0 {
        mean.signum() * f64::INFINITY
    } else {
        mean / se
    };
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_two_sided_p(t, df as f64),
        n_pairs: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// Sample standard deviation; 0 when `n == 1`.
    pub std_dev: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// at position `(n - 1) * q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (mean, std_dev) = mean_std(&sorted);
    Ok(SummaryStats {
        n,
        mean,
        min: sorted[0],
        max: sorted[n - 1],
        median: quantile_sorted(&sorted, 0.5),
        std_dev,
        q25: quantile_sorted(&sorted, 0.25),
        q75: quantile_sorted(&sorted, 0.75),
    })
}

/// Mean and sample standard deviation (0 for a single value). `(NaN, NaN)`
/// for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    fn reference_p(t: f64, df: f64) -> f64 {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        2.0 * (1.0 - dist.cdf(t.abs()))
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(10.0), 362_880f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a, I_x(1, b) = 1 - (1 - x)^b
        for &x in &[0.1, 0.35, 0.5, 0.9] {
            assert_relative_eq!(regularized_incomplete_beta(1.0, 1.0, x), x, max_relative = 1e-12);
            assert_relative_eq!(regularized_incomplete_beta(3.0, 1.0, x), x.powi(3), max_relative = 1e-12);
            assert_relative_eq!(
                regularized_incomplete_beta(1.0, 4.0, x),
                1.0 - (1.0 - x).powi(4),
                max_relative = 1e-12
            );
        }
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn tail_probabilities_match_tables() {
        // t = 4.2426 with 4 df, the critical values 2.262 (9 df) and 1.96 (large df).
        assert!((student_t_two_sided_p(4.2426, 4.0) - 0.013236).abs() < 1e-5);
        assert!((student_t_two_sided_p(2.262, 9.0) - 0.05).abs() < 1e-4);
        assert!((student_t_two_sided_p(1.96, 1000.0) - 0.0503).abs() < 1e-4);
        // Cauchy: P(|T| > 1) = 0.5
        assert_relative_eq!(student_t_two_sided_p(1.0, 1.0), 0.5, max_relative = 1e-12);
        assert_eq!(student_t_two_sided_p(0.0, 7.0), 1.0);
    }

    #[test]
    fn tail_probabilities_match_reference_cdf() {
        for &df in &[1.0, 2.0, 3.0, 5.0, 9.0, 15.0, 30.0, 120.0, 1000.0, 5000.0] {
            for &t in &[0.01, 0.3, 1.0, 1.5, 2.0, 2.5, 3.5, 5.0, 8.0] {
                let ours = student_t_two_sided_p(t, df);
                let reference = reference_p(t, df);
                assert!(
                    (ours - reference).abs() <= 1e-10_f64.max(1e-8 * reference),
                    "t={t} df={df}: {ours} vs {reference}"
                );
            }
        }
    }

    #[test]
    fn paired_t_on_known_differences() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0; 5];
        let r = paired_t_test(&x, &y).unwrap();
        // mean 3, sd sqrt(2.5), t = 3 / (sqrt(2.5) / sqrt 5) = 3 sqrt 2
        assert_relative_eq!(r.t_statistic, 3.0 * 2f64.sqrt(), max_relative = 1e-12);
        assert_eq!(r.degrees_of_freedom, 4);
        assert!((r.p_value - 0.0132).abs() < 1e-4);

        let swapped = paired_t_test(&y, &x).unwrap();
        assert_eq!(swapped.t_statistic, -r.t_statistic);
        assert_eq!(swapped.p_value, r.p_value);
    }

    #[test]
    fn paired_t_edge_cases() {
        let x = [0.3, 0.7, 0.1];
        let r = paired_t_test(&x, &x).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (0.0, 1.0));
        assert!(matches!(paired_t_test(&[1.0], &[2.0]), Err(Error::InsufficientData { .. })));
        assert!(matches!(paired_t_test(&[1.0, 2.0], &[2.0]), Err(Error::LengthMismatch(2, 1))));
        let r = paired_t_test(&[2.0, 3.0], &[1.0, 2.0]).unwrap();
        assert!(r.t_statistic.is_infinite());
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn summary_of_one_to_four() {
        let s = summary_stats(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q25, 1.75);
        assert_eq!(s.q75, 3.25);
        assert_eq!((s.min, s.max), (1.0, 4.0));
        assert_relative_eq!(s.std_dev, 1.2909944487358056, max_relative = 1e-12);
    }

    #[test]
    fn summary_degenerate_inputs() {
        let s = summary_stats(&[7.5]).unwrap();
        assert_eq!(
            (s.mean, s.min, s.max, s.median, s.q25, s.q75, s.std_dev),
            (7.5, 7.5, 7.5, 7.5, 7.5, 7.5, 0.0)
        );
        let c = summary_stats(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((c.min, c.max, c.mean, c.std_dev), (2.0, 2.0, 2.0, 0.0));
        assert!(summary_stats(&[]).is_err());
    }

    proptest! {
        #[test]
        fn summary_is_ordered(values in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let s = summary_stats(&values).unwrap();
            prop_assert!(s.min <= s.q25 && s.q25 <= s.median && s.median <= s.q75 && s.q75 <= s.max);
        }

        #[test]
        fn p_value_ignores_common_shift(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..20),
            shift in -100.0f64..100.0,
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
            let a = paired_t_test(&x, &y).unwrap();
            let b = paired_t_test(&xs, &ys).unwrap();
            prop_assert!((a.p_value - b.p_value).abs() < 1e-9);
        }

        #[test]
        fn swapping_negates_t(pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..20)) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let a = paired_t_test(&x, &y).unwrap();
            let b = paired_t_test(&y, &x).unwrap();
            prop_assert_eq!(a.t_statistic, -b.t_statistic);
            prop_assert_eq!(a.p_value, b.p_value);
        }
    }
}
