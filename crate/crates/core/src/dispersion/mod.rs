//! Concentration `Q(Y; λ) = sup_x P(x ≤ Y ≤ x + λ)` and dispersion
//! `D(Y; λ) = E[Y² 1{|Y| ≤ λ}] / λ² + P(|Y| ≥ λ)`, and the tools built on
//! them: the divergence classifier for `Σ X_j^s`, the concentration decay
//! probe for partial sums, and the exact shift-inequality checker.

mod classifier;
mod petrov;
mod shift;

use crate::error::{Error, Result};
use crate::increments::{analytic_d, WaitingTimeModel};

pub use classifier::{
    three_series_classifier, DispersionReport, Evidence, Verdict, DEFAULT_J_MAX, MIN_J_MAX, PLATEAU_TOLERANCE,
    SLOPE_THRESHOLD,
};
pub use petrov::{petrov_probe, PetrovRow, PetrovTable, SumMode, MIN_PETROV_SAMPLES};
pub use shift::{
    random_shift_trial, shift_fuzz, unimodal_shift_check, DiscreteDistribution, FuzzSummary, ShapeClaim, ShiftReport,
    StepFunction,
};

/// Plug-in estimate of `Q(Y; λ)`: the largest fraction of samples in a
/// window `[y_i, y_i + λ]`.
pub fn empirical_q(samples: &[f64], lambda: f64) -> Result<f64> {
    let mut sorted = samples.to_vec();
    if sorted.iter().any(|x| x.is_nan()) {
        return Err(Error::argument("samples contain NaN"));
    }
    sorted.sort_by(f64::total_cmp);
    empirical_q_sorted(&sorted, lambda)
}

/// [`empirical_q`] for samples already in ascending order.
pub fn empirical_q_sorted(sorted: &[f64], lambda: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::argument("empirical Q needs at least one sample"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::argument(format!("lambda must be >= 0, got {lambda}")));
    }
    let mut best = 0usize;
    let mut hi = 0usize;
    for lo in 0..sorted.len() {
        if hi < lo {
            hi = lo;
        }
        let edge = sorted[lo] + lambda;
        while hi < sorted.len() && sorted[hi] <= edge {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    Ok(best as f64 / sorted.len() as f64)
}

/// What `D` is computed from.
#[derive(Clone, Copy, Debug)]
pub enum DispersionSource<'a> {
    /// The symmetrized increment of `level` under a waiting-time model.
    Model { model: &'a WaitingTimeModel, level: u64 },
    /// Draws of the variable itself.
    Samples(&'a [f64]),
}

pub fn dispersion_d(source: DispersionSource<'_>, lambda: f64) -> Result<f64> {
    match source {
        DispersionSource::Model { model, level } => analytic_d(model, level, lambda),
        DispersionSource::Samples(ys) => plug_in_d(ys, lambda),
    }
}

pub(crate) fn plug_in_d(ys: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::argument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if ys.is_empty() {
        return Err(Error::argument("plug-in D needs at least one sample"));
    }
    let mut inside = 0.0;
    let mut tail = 0usize;
    for &y in ys {
        let a = y.abs();
        if a <= lambda {
            inside += y * y;
        }
        if a >= lambda {
            tail += 1;
        }
    }
    let n = ys.len() as f64;
    Ok(inside / (lambda * lambda) / n + tail as f64 / n)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::increments::{make_exponential_model, FeedbackFunction};

    #[test]
    fn q_best_window() {
        assert_eq!(empirical_q(&[3.0, 0.0, 2.0, 1.0], 1.0).unwrap(), 0.5);
        assert_eq!(empirical_q(&[0.0, 1.0, 2.0], 0.0).unwrap(), 1.0 / 3.0);
        assert_eq!(empirical_q(&[1.0, 1.0, 2.0, 5.0], 0.0).unwrap(), 0.5);
        assert_eq!(empirical_q(&[-4.0, 1.0, 9.0], 13.0).unwrap(), 1.0);
        assert!(empirical_q(&[], 1.0).is_err());
        assert!(empirical_q(&[1.0], -1.0).is_err());
    }

    #[test]
    fn plug_in_d_examples() {
        let d = |ys: &[f64], l| dispersion_d(DispersionSource::Samples(ys), l).unwrap();
        assert_eq!(d(&[0.0, 0.0], 1.0), 0.0);
        assert_eq!(d(&[-2.0, 2.0], 1.0), 1.0);
        assert_eq!(d(&[-1.0, 1.0], 2.0), 0.25);
        // |y| = λ counts in both terms.
        assert_eq!(d(&[1.0], 1.0), 2.0);
        assert!(dispersion_d(DispersionSource::Samples(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn model_source_uses_closed_form() {
        let model = make_exponential_model(FeedbackFunction::constant(1.0).unwrap());
        let d = dispersion_d(
            DispersionSource::Model {
                model: &model,
                level: 1,
            },
            1.0,
        )
        .unwrap();
        assert!((d - 0.528_482_235_314_230_7).abs() < 1e-14);
    }

    fn brute_q(xs: &[f64], lambda: f64) -> f64 {
        let best = xs
            .iter()
            .map(|&lo| xs.iter().filter(|&&x| x >= lo && x <= lo + lambda).count())
            .max()
            .unwrap();
        best as f64 / xs.len() as f64
    }

    proptest! {
        #[test]
        fn q_matches_quadratic_scan(xs in proptest::collection::vec(-20i32..20, 1..40), l in 0u32..10) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            prop_assert_eq!(empirical_q(&xs, l as f64).unwrap(), brute_q(&xs, l as f64));
        }

        #[test]
        fn q_is_monotone_in_lambda_and_bounded(
            xs in proptest::collection::vec(-1e3f64..1e3, 1..60),
            a in 0f64..50.0,
            b in 0f64..50.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let q_lo = empirical_q(&xs, lo).unwrap();
            let q_hi = empirical_q(&xs, hi).unwrap();
            prop_assert!(q_lo <= q_hi);
            prop_assert!(q_lo >= 1.0 / xs.len() as f64 && q_hi <= 1.0);
        }
    }
}
