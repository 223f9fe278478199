//! Sample summaries and one-sided tests used to compare sweep cells.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub n: usize,
    pub mean: f64,
    /// Unbiased variance.
    pub var: f64,
}

impl Sample {
    pub fn of(xs: &[f64]) -> Sample {
        let n = xs.len();
        if n == 0 {
            return Sample { n, mean: f64::NAN, var: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Sample { n, mean, var }
    }

    pub fn sem2(&self) -> f64 {
        self.var / self.n as f64
    }
}

/// Welch's t-test p-value for `H1: mean(b) > mean(a)`.
pub fn welch_greater(a: &Sample, b: &Sample) -> f64 {
    let se2 = a.sem2() + b.sem2();
    let diff = b.mean - a.mean;
    if se2 == 0.0 {
        return if diff > 0.0 { 0.0 } else { 1.0 };
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2
        / (a.sem2().powi(2) / (a.n as f64 - 1.0).max(1.0) + b.sem2().powi(2) / (b.n as f64 - 1.0).max(1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    1.0 - dist.cdf(t)
}

/// Delta-method p-value for `H1: num_b/den_b > num_a/den_a`, comparing
/// log ratios of means of four independent samples.
pub fn ratio_greater(num_a: &Sample, den_a: &Sample, num_b: &Sample, den_b: &Sample) -> f64 {
    let log_ratio = |n: &Sample, d: &Sample| n.mean.ln() - d.mean.ln();
    let var = |s: &Sample| s.sem2() / (s.mean * s.mean);
    let diff = log_ratio(num_b, den_b) - log_ratio(num_a, den_a);
    let se = (var(num_a) + var(den_a) + var(num_b) + var(den_b)).sqrt();
    if !se.is_finite() || se == 0.0 {
        return if diff > 0.0 { 0.0 } else { 1.0 };
    }
    1.0 - Normal::standard().cdf(diff / se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_moments() {
        let s = Sample::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.var - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn welch_matches_reference() {
        // scipy.stats.ttest_ind(b, a, equal_var=False, alternative="greater")
        // a = [1, 2, 3, 4, 5], b = [3, 4, 5, 6, 8] -> p = 0.0424780331486216
        let a = Sample::of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = Sample::of(&[3.0, 4.0, 5.0, 6.0, 8.0]);
        assert!((welch_greater(&a, &b) - 0.042_478_033_148_621_6).abs() < 1e-12, "{}", welch_greater(&a, &b));
        assert!(welch_greater(&b, &a) > 0.9);
    }

    #[test]
    fn ratio_test_direction() {
        let s = |m: f64| Sample { n: 200, mean: m, var: m };
        assert!(ratio_greater(&s(40.0), &s(8.0), &s(100.0), &s(10.0)) < 1e-6);
        assert!(ratio_greater(&s(100.0), &s(10.0), &s(40.0), &s(8.0)) > 0.99);
    }
}
