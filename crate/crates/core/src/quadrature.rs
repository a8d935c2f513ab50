//! Adaptive wrapper around tanh-sinh integration.
//!
//! The underlying rule has a fixed evaluation budget per interval; panels
//! whose error estimate misses the target are bisected.

const MAX_DEPTH: u32 = 24;

/// `∫_a^b f` to relative tolerance `rel_tol` (absolute floor `abs_floor`).
/// `b` may be `f64::INFINITY`.
pub fn integrate<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if !(b > a) {
        return 0.0;
    }
    if b.is_infinite() {
        // x = a + t / (1 - t), t in [0, 1)
        let g = |t: f64| {
            let one_minus = 1.0 - t;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let x = a + t / one_minus;
            f(x) / (one_minus * one_minus)
        };
        return integrate_finite(&g, 0.0, 1.0, rel_tol, abs_floor);
    }
    integrate_finite(&f, a, b, rel_tol, abs_floor)
}

fn integrate_finite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> f64 {
    let first = quadrature::integrate(f, a, b, abs_floor);
    let target = (rel_tol * first.integral.abs()).max(abs_floor);
    if first.error_estimate <= target {
        return first.integral;
    }
    refine(f, a, b, first.integral, target, 0)
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, target: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let half_target = 0.5 * target;
    let left = quadrature::integrate(f, a, mid, half_target);
    let right = quadrature::integrate(f, mid, b, half_target);
    let sum = left.integral + right.integral;
    if depth >= MAX_DEPTH || (left.error_estimate <= half_target && right.error_estimate <= half_target) {
        return sum;
    }
    if (sum - whole).abs() <= 0.1 * target {
        return sum;
    }
    let l = if left.error_estimate <= half_target {
        left.integral
    } else {
        refine(f, a, mid, left.integral, half_target, depth + 1)
    };
    let r = if right.error_estimate <= half_target {
        right.integral
    } else {
        refine(f, mid, b, right.integral, half_target, depth + 1)
    };
    l + r
}
