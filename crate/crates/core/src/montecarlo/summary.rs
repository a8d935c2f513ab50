use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{z_for_confidence, RunningStats};

/// Largest fraction of excluded replicates for which a summary stays valid.
pub const EXCLUSION_LIMIT: f64 = 0.01;

/// Mean of a per-replicate metric with a normal-approximation interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub metric: String,
    pub count: u64,
    pub excluded: u64,
    pub mean: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// False when more than [`EXCLUSION_LIMIT`] of the replicates were excluded.
    pub valid: bool,
}

impl SummaryStats {
    pub fn from_values(metric: &str, values: &[f64], excluded: u64, confidence: f64) -> Self {
        let stats: RunningStats = values.iter().copied().collect();
        let z = z_for_confidence(confidence);
        let total = stats.count() + excluded;
        SummaryStats {
            metric: metric.to_string(),
            count: stats.count(),
            excluded,
            mean: stats.mean(),
            std_err: stats.std_err(),
            ci_low: stats.mean() - z * stats.std_err(),
            ci_high: stats.mean() + z * stats.std_err(),
            valid: total > 0 && excluded as f64 <= EXCLUSION_LIMIT * total as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64, confidence: f64) -> Result<Self> {
        let (ci_low, ci_high) = wilson_interval(successes, trials, confidence)?;
        Ok(Proportion {
            successes,
            trials,
            fraction: successes as f64 / trials as f64,
            ci_low,
            ci_high,
            confidence,
        })
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::argument(format!(
            "need 0 <= successes <= trials, trials >= 1; got {successes}/{trials}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::argument(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = z_for_confidence(confidence);
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_edges() {
        let (lo, hi) = wilson_interval(0, 20, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.1 && hi < 0.2);
        let (lo, hi) = wilson_interval(20, 20, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo > 0.8);
        assert!(wilson_interval(1, 0, 0.95).is_err());
        assert!(wilson_interval(3, 2, 0.95).is_err());
        assert!(wilson_interval(1, 2, 1.0).is_err());
    }

    #[test]
    fn wilson_half_matches_closed_form() {
        // p = 1/2, n = 100: centre 1/2, half-width z sqrt(1/400 + z^2/40000) / (1 + z^2/100).
        let (lo, hi) = wilson_interval(50, 100, 0.95).unwrap();
        assert!((lo - 0.403_831).abs() < 1e-5, "{lo}");
        assert!((hi - 0.596_169).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn summary_validity_tracks_exclusions() {
        let values = vec![1.0; 99];
        assert!(SummaryStats::from_values("m", &values, 1, 0.95).valid);
        assert!(!SummaryStats::from_values("m", &values[..98], 2, 0.95).valid);
        let s = SummaryStats::from_values("m", &[1.0, 3.0], 0, 0.95);
        assert_eq!(s.mean, 2.0);
        assert!((s.std_err - 1.0).abs() < 1e-12);
    }
}
