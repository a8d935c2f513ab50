//! Does `Σ_j X_j^s` diverge? By the three-series theorem it does exactly
//! when `Σ_j D(X_j^s; λ)` diverges, for any `λ > 0`.
//!
//! For exponential waits with a feedback function of known tail exponent
//! `q` (so `f(m) ~ c m^q`), `D(X_j^s; λ) ≍ f(j - 1)^{-2}` once `f` is large,
//! and the sum diverges iff `2q ≤ 1`. Otherwise the verdict comes from the
//! partial sums on a geometric grid of `J`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{analytic_d, WaitingTimeModel};

pub const MIN_J_MAX: u64 = 1_000;
pub const DEFAULT_J_MAX: u64 = 1_000_000;
/// Top-decade log-log slope above which the partial sums count as growing.
pub const SLOPE_THRESHOLD: f64 = 0.05;
/// Top-decade relative growth below which the partial sums count as flat.
pub const PLATEAU_TOLERANCE: f64 = 0.01;
const GOOD_FIT_R2: f64 = 0.98;
const GRID_POINTS_PER_DECADE: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Diverges,
    Converges,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Least-squares slope of `ln S_J` against `ln J` over the top decade.
    pub slope: f64,
    pub r_squared: f64,
    /// `(S_Jmax - S_{Jmax/10}) / S_Jmax`.
    pub top_decade_growth: f64,
    pub numeric_verdict: Verdict,
    /// Tail exponent `q` of the feedback, when the exact rule applies.
    pub tail_exponent: Option<f64>,
    pub exact_verdict: Option<Verdict>,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub lambda: f64,
    pub grid: Vec<u64>,
    /// `Σ_{j ≤ J} D(X_j^s; λ)` for each `J` in `grid`.
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
    pub evidence: Evidence,
}

fn geometric_grid(j_max: u64) -> Vec<u64> {
    let decades = (j_max as f64).log10();
    let steps = (decades * GRID_POINTS_PER_DECADE).ceil() as u64;
    let mut grid: Vec<u64> = (0..=steps)
        .map(|k| 10f64.powf(k as f64 / GRID_POINTS_PER_DECADE).round() as u64)
        .filter(|&j| j >= 1 && j <= j_max)
        .collect();
    grid.push(j_max);
    grid.dedup();
    grid
}

fn exact_rule(model: &WaitingTimeModel) -> Option<(f64, Verdict)> {
    match model {
        WaitingTimeModel::Exponential { feedback } => feedback.tail_exponent().map(|q| {
            let v = if q <= 0.5 {
                Verdict::Diverges
            } else {
                Verdict::Converges
            };
            (q, v)
        }),
        _ => None,
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

pub fn three_series_classifier(model: &WaitingTimeModel, lambda: f64, j_max: u64) -> Result<DispersionReport> {
    if j_max < MIN_J_MAX {
        return Err(Error::argument(format!("J_max must be >= {MIN_J_MAX}, got {j_max}")));
    }
    let grid = geometric_grid(j_max);
    let mut partial_sums = Vec::with_capacity(grid.len());
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut next = 0;
    let same_law_every_level = matches!(
        model,
        WaitingTimeModel::DeterministicPlusUniform { .. } | WaitingTimeModel::Empirical { .. }
    );
    let first = analytic_d(model, 1, lambda)?;
    for j in 1..=j_max {
        let d = if same_law_every_level || j == 1 {
            first
        } else {
            analytic_d(model, j, lambda)?
        };
        let t = sum + d;
        comp += (sum - t) + d;
        sum = t;
        if grid[next] == j {
            partial_sums.push(sum + comp);
            next += 1;
        }
    }

    let floor = j_max / 10;
    let top: Vec<usize> = (0..grid.len()).filter(|&i| grid[i] >= floor).collect();
    let s_top = *partial_sums.last().expect("non-empty grid");
    let s_floor = partial_sums[top[0]];
    let top_decade_growth = if s_top > 0.0 { (s_top - s_floor) / s_top } else { 0.0 };
    let (slope, r_squared) = if s_floor > 0.0 {
        let xs: Vec<f64> = top.iter().map(|&i| (grid[i] as f64).ln()).collect();
        let ys: Vec<f64> = top.iter().map(|&i| partial_sums[i].ln()).collect();
        least_squares(&xs, &ys)
    } else {
        (0.0, 1.0)
    };
    let numeric_verdict = if top_decade_growth < PLATEAU_TOLERANCE {
        Verdict::Converges
    } else if slope > SLOPE_THRESHOLD && r_squared >= GOOD_FIT_R2 {
        Verdict::Diverges
    } else {
        Verdict::Inconclusive
    };

    let exact = exact_rule(model);
    let verdict = exact.map_or(numeric_verdict, |(_, v)| v);
    let mut description = format!(
        "top-decade slope {slope:.4} (r² {r_squared:.4}), growth {:.3}% over [{floor}, {j_max}]",
        100.0 * top_decade_growth
    );
    if let Some((q, v)) = exact {
        let note = if numeric_verdict == Verdict::Inconclusive || numeric_verdict == v {
            "consistent"
        } else {
            "disagrees with the finite-J fit"
        };
        description.push_str(&format!(
            "; tail exponent {q} gives {v:?} (2q {} 1), numeric evidence {note}",
            if 2.0 * q <= 1.0 { "<=" } else { ">" }
        ));
    }

    Ok(DispersionReport {
        lambda,
        grid,
        partial_sums,
        verdict,
        evidence: Evidence {
            slope,
            r_squared,
            top_decade_growth,
            numeric_verdict,
            tail_exponent: exact.map(|(q, _)| q),
            exact_verdict: exact.map(|(_, v)| v),
            description,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::{make_exponential_model, FeedbackFunction};

    fn power(p: f64) -> WaitingTimeModel {
        make_exponential_model(FeedbackFunction::power(p).unwrap())
    }

    #[test]
    fn grid_is_geometric_and_ends_at_j_max() {
        let g = geometric_grid(1000);
        assert_eq!(g[0], 1);
        assert_eq!(*g.last().unwrap(), 1000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*geometric_grid(1234).last().unwrap(), 1234);
    }

    #[test]
    fn j_max_floor() {
        assert!(three_series_classifier(&power(1.0), 1.0, 999).is_err());
    }

    #[test]
    fn power_rule() {
        for (p, want) in [(0.4, Verdict::Diverges), (0.6, Verdict::Converges)] {
            let r = three_series_classifier(&power(p), 1.0, 10_000).unwrap();
            assert_eq!(r.verdict, want, "p = {p}: {}", r.evidence.description);
            assert!(r.partial_sums.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn constant_rate_grows_linearly() {
        let r = three_series_classifier(
            &make_exponential_model(FeedbackFunction::constant(1.0).unwrap()),
            1.0,
            10_000,
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Diverges);
        assert_eq!(r.evidence.numeric_verdict, Verdict::Diverges);
        assert!((r.evidence.slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn numeric_route_without_exact_rule() {
        // Deterministic waits: every D is zero, a flat sum.
        let det = WaitingTimeModel::deterministic_plus_uniform(1.0, 0.0).unwrap();
        let r = three_series_classifier(&det, 1.0, 1000).unwrap();
        assert_eq!(r.verdict, Verdict::Converges);
        assert!(r.evidence.exact_verdict.is_none());

        // Fixed uniform jitter: identical positive terms.
        let uni = WaitingTimeModel::deterministic_plus_uniform(1.0, 0.5).unwrap();
        assert_eq!(
            three_series_classifier(&uni, 1.0, 1000).unwrap().verdict,
            Verdict::Diverges
        );
    }

    #[test]
    fn fast_feedback_flattens_numerically() {
        let r = three_series_classifier(&power(2.0), 1.0, 10_000).unwrap();
        assert_eq!(r.evidence.numeric_verdict, Verdict::Converges);
        assert_eq!(r.verdict, Verdict::Converges);
    }
}
