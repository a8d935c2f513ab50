//! Goodness-of-fit and summary statistics shared by the experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson's chi-square test of `observed` counts against cell
/// probabilities `probs`, with `probs.len() - 1` degrees of freedom.
pub fn chi_square_test(observed: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::argument(
            "chi-square needs matching observed/probability vectors of length >= 2",
        ));
    }
    if probs.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::argument("chi-square cell probabilities must be positive"));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::argument("chi-square needs at least one observation"));
    }
    let n = n as f64;
    let statistic = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = n * p;
            (o as f64 - e).powi(2) / e
        })
        .sum::<f64>();
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: dof,
        p_value: dist.sf(statistic),
    })
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        // The alternating series converges slowly here; the sf is 1 to double precision.
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test of `samples` against `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> KsTest {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let c = cdf(x);
        d = d.max(c - i as f64 / n).max((i + 1) as f64 / n - c);
    }
    let en = n.sqrt();
    KsTest {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    }
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> KsTest {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    KsTest {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    }
}

/// Two-sided standard normal quantile for a confidence level, e.g. 1.96 for 0.95.
pub fn z_for_confidence(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_matches_reference() {
        // Reference: scipy.stats.chisquare([28, 31, 40, 35]) -> 2.4179104477611943, p 0.49030930696538
        let t = chi_square_test(&[28, 31, 40, 35], &[0.25; 4]).unwrap();
        assert!((t.statistic - 2.417_910_447_761_194).abs() < 1e-12);
        assert!((t.p_value - 0.490_309_306_965_388).abs() < 1e-9);
        assert_eq!(t.degrees_of_freedom, 3);
    }

    #[test]
    fn chi_square_rejects_bad_input() {
        assert!(chi_square_test(&[1, 2], &[1.0]).is_err());
        assert!(chi_square_test(&[0, 0], &[0.5, 0.5]).is_err());
        assert!(chi_square_test(&[1, 2], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn kolmogorov_reference_points() {
        // P(K > 1.36) ≈ 0.0494, P(K > 1.0) ≈ 0.2700
        assert!((kolmogorov_sf(1.358_098_8) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.0) - 0.269_999_671).abs() < 1e-6);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_on_exact_quantiles_is_tiny() {
        let n = 1000;
        let mut xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let t = ks_test(&mut xs, |x| x.clamp(0.0, 1.0));
        assert!(t.statistic <= 0.5 / n as f64 + 1e-12);
        assert!(t.p_value > 0.999);
    }

    #[test]
    fn two_sample_ks_detects_shift() {
        let mut a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let mut b: Vec<f64> = (0..500).map(|i| i as f64 + 250.0).collect();
        let t = ks_two_sample(&mut a, &mut b);
        assert!((t.statistic - 0.5).abs() < 1e-12);
        assert!(t.p_value < 1e-10);
    }

    #[test]
    fn running_stats() {
        let s: RunningStats = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_eq!(s.mean(), 2.5);
        assert!((s.variance() - 5.0 / 3.0).abs() < 1e-12);
        assert!((z_for_confidence(0.95) - 1.959_963_984_540_054).abs() < 1e-9);
    }
}
