//! Small statistical helpers: running moments, normal and Wilson intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided standard-normal quantile for a confidence level, e.g. 1.96 for 0.95.
pub fn z_two_sided(confidence: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Running count, mean and sum of squared deviations (Welford). Merging
/// uses the pairwise update, so chunked reductions stay deterministic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = (self.n + other.n) as f64;
        let d = other.mean - self.mean;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n;
        self.mean += d * other.n as f64 / n;
        self.n += other.n;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    pub fn sum(&self) -> f64 {
        self.mean * self.n as f64
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }

    /// Normal-approximation interval `(lower, upper)`.
    pub fn normal_ci(&self, confidence: f64) -> (f64, f64) {
        let z = z_two_sided(confidence);
        let m = self.mean();
        let h = z * self.std_error();
        (m - h, m + h)
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = z_two_sided(confidence);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Ceiling that ignores floating-point dust just above an integer.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_for_95_percent() {
        assert!((z_two_sided(0.95) - 1.959964).abs() < 1e-5);
    }

    #[test]
    fn moments_match_direct_formula() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let m: Moments = xs.iter().copied().collect();
        assert_eq!(m.mean(), 3.5);
        let v = xs.iter().map(|x| (x - 3.5f64).powi(2)).sum::<f64>() / 3.0;
        assert!((m.variance() - v).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_single_pass() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let all: Moments = xs.iter().copied().collect();
        let mut a: Moments = xs[..17].iter().copied().collect();
        a.merge(&xs[17..].iter().copied().collect());
        assert_eq!(a.n, all.n);
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-14);
    }

    #[test]
    fn constant_data_has_zero_variance() {
        let m: Moments = std::iter::repeat_n(0.9, 1000).collect();
        assert_eq!(m.variance(), 0.0);
    }

    #[test]
    fn wilson_zero_successes_has_zero_lower_bound() {
        let (lo, hi) = wilson_interval(0, 1000, 0.95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.003 && hi < 0.004);
    }

    #[test]
    fn ceil_tol_absorbs_rounding() {
        assert_eq!(ceil_tol(3.0000000000000004), 3.0);
        assert_eq!(ceil_tol(6.009), 7.0);
        assert_eq!(ceil_tol(16.64), 17.0);
    }
}
