//! Dispersion `D(X_j^s; λ) = E[(X^s)² 1{|X^s| ≤ λ}] / λ² + P(|X^s| ≥ λ)`
//! of a symmetrized level increment.
//!
//! Exponential levels use the Laplace closed form. Empirical levels are
//! exact sums over ordered pairs. Other continuous families are integrated
//! numerically:
//!
//! ```text
//! D = 2/λ² ∫ g(y) ∫_y^{y+λ} (x - y)² g(x) dx dy  +  2 ∫ g(y) P(X > y + λ) dy
//! ```
//!
//! Every integrand is non-negative, so no term is formed by cancellation.

use super::model::{LevelLaw, WaitingTimeModel};
use crate::error::{Error, Result};
use crate::quadrature;

/// Relative tolerance of the numeric route.
pub const QUADRATURE_REL_TOL: f64 = 1e-8;

pub fn analytic_d(model: &WaitingTimeModel, level: u64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    law_d(&model.law(level)?, lambda)
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::argument(format!(
            "lambda must be positive and finite, got {lambda}"
        )))
    }
}

/// `D` for a resolved level law.
pub fn law_d(law: &LevelLaw<'_>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    match *law {
        LevelLaw::Exponential { rate } => Ok(laplace_d(rate * lambda)),
        LevelLaw::Uniform { jitter, .. } if jitter == 0.0 => Ok(0.0),
        LevelLaw::Empirical(samples) => Ok(empirical_pairs_d(samples, lambda)),
        _ => quadrature_d(law, lambda),
    }
}

/// `D(L; λ)` for `L` Laplace with scale `1/r`, written in `x = rλ`:
/// `2 P(Poisson(x) ≥ 3) / x² + e^{-x}`.
pub fn laplace_d(x: f64) -> f64 {
    if x < 1.0 {
        // 2 e^{-x} Σ_{k≥3} x^{k-2} / k!, avoiding 1 - e^{-x}(1 + x + x²/2)
        let mut term = x / 6.0;
        let mut sum = 0.0;
        let mut k = 3.0;
        while term > sum * 1e-18 && term > 0.0 {
            sum += term;
            k += 1.0;
            term *= x / k;
        }
        2.0 * (-x).exp() * sum + (-x).exp()
    } else {
        let e = (-x).exp();
        2.0 * (1.0 - e * (1.0 + x + 0.5 * x * x)) / (x * x) + e
    }
}

fn empirical_pairs_d(samples: &[f64], lambda: f64) -> f64 {
    let n = samples.len() as f64;
    let mut total = 0.0;
    for &a in samples {
        for &b in samples {
            let z = a - b;
            if z.abs() <= lambda {
                total += z * z / (lambda * lambda);
            }
            if z.abs() >= lambda {
                total += 1.0;
            }
        }
    }
    total / (n * n)
}

/// The numeric route. Public so that it can be checked against the closed
/// forms on families that have both.
pub fn quadrature_d(law: &LevelLaw<'_>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if law.density(0.0).is_none() {
        return Err(Error::UnsupportedFamily(format!("{law:?}")));
    }
    let g = |x: f64| law.density(x).unwrap_or(0.0);
    let (lo, hi) = law.support();
    let tol = QUADRATURE_REL_TOL * 1e-2;
    let floor = 1e-300;

    let inner = |y: f64| {
        let gy = g(y);
        if gy == 0.0 {
            return 0.0;
        }
        let upper = (y + lambda).min(hi);
        gy * quadrature::integrate(|x| (x - y) * (x - y) * g(x), y, upper, tol, floor)
    };
    let inside = quadrature::integrate(inner, lo, hi, tol, floor);
    let tail = quadrature::integrate(|y| g(y) * law.sf(y + lambda), lo, hi, tol, floor);
    Ok(2.0 * inside / (lambda * lambda) + 2.0 * tail)
}
