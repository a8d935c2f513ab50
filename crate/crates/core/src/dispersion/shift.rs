//! Exact check of the shift inequalities
//!
//! ```text
//! |E h(Y + s) - E h(Y)| ≤  Q(Y; s)   for non-decreasing h: R -> [0, 1]
//! |E h(Y + s) - E h(Y)| ≤ 2 Q(Y; s)  for unimodal h: [a, b] -> [0, 1], Y ∈ [a, b - s]
//! ```
//!
//! on finitely supported `Y` and step functions `h`, in rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// A finitely supported law with rational atoms and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<BigRational>,
    probabilities: Vec<BigRational>,
}

impl DiscreteDistribution {
    /// Atoms may be given in any order; repeated atoms are merged.
    pub fn new(atoms: Vec<(BigRational, BigRational)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::argument("a distribution needs at least one atom"));
        }
        if atoms.iter().any(|(_, p)| !p.is_positive()) {
            return Err(Error::argument("atom probabilities must be positive"));
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut support: Vec<BigRational> = Vec::with_capacity(atoms.len());
        let mut probabilities: Vec<BigRational> = Vec::with_capacity(atoms.len());
        for (x, p) in atoms {
            if support.last() == Some(&x) {
                *probabilities.last_mut().expect("paired") += p;
            } else {
                support.push(x);
                probabilities.push(p);
            }
        }
        let total: BigRational = probabilities.iter().sum();
        if !total.is_one() {
            return Err(Error::argument(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteDistribution { support, probabilities })
    }

    pub fn uniform(points: Vec<BigRational>) -> Result<Self> {
        let w = ratio(1, points.len().max(1) as i64);
        Self::new(points.into_iter().map(|x| (x, w.clone())).collect())
    }

    pub fn support(&self) -> &[BigRational] {
        &self.support
    }

    pub fn probabilities(&self) -> &[BigRational] {
        &self.probabilities
    }

    pub fn expect<F: Fn(&BigRational) -> BigRational>(&self, h: F) -> BigRational {
        self.support
            .iter()
            .zip(&self.probabilities)
            .map(|(x, p)| h(x) * p)
            .sum()
    }

    /// `P(x ≤ Y ≤ x + s)`.
    pub fn window_mass(&self, x: &BigRational, s: &BigRational) -> BigRational {
        let hi = x + s;
        self.support
            .iter()
            .zip(&self.probabilities)
            .filter(|(y, _)| *y >= x && **y <= hi)
            .map(|(_, p)| p.clone())
            .sum()
    }

    /// `Q(Y; s)`. Some window attaining the supremum starts at an atom, so
    /// only those windows are scanned.
    pub fn exact_q(&self, s: &BigRational) -> BigRational {
        self.support
            .iter()
            .map(|x| self.window_mass(x, s))
            .max()
            .expect("non-empty support")
    }
}

/// A right-continuous step function: `h(y)` is the value of the last knot at
/// or left of `y`, and the first knot's value left of all knots.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    knots: Vec<(BigRational, BigRational)>,
}

impl StepFunction {
    pub fn new(knots: Vec<(BigRational, BigRational)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::argument("a step function needs at least one knot"));
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::argument("knot positions must be strictly increasing"));
        }
        let (zero, one) = (BigRational::zero(), BigRational::one());
        if knots.iter().any(|(_, v)| *v < zero || *v > one) {
            return Err(Error::argument("step function values must lie in [0, 1]"));
        }
        Ok(StepFunction { knots })
    }

    pub fn constant(value: BigRational) -> Result<Self> {
        Self::new(vec![(BigRational::zero(), value)])
    }

    pub fn knots(&self) -> &[(BigRational, BigRational)] {
        &self.knots
    }

    pub fn eval(&self, y: &BigRational) -> BigRational {
        let i = self.knots.partition_point(|(x, _)| x <= y);
        self.knots[i.saturating_sub(1)].1.clone()
    }

    fn values(&self) -> impl Iterator<Item = &BigRational> {
        self.knots.iter().map(|(_, v)| v)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.knots.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    /// Index of the first knot carrying the maximum value.
    fn peak(&self) -> usize {
        let max = self.values().max().expect("non-empty");
        self.values().position(|v| v == max).expect("max exists")
    }

    pub fn is_unimodal(&self) -> bool {
        let t = self.peak();
        self.knots[..=t].windows(2).all(|w| w[0].1 <= w[1].1) && self.knots[t..].windows(2).all(|w| w[0].1 >= w[1].1)
    }

    /// `h = rise - fall` with both pieces non-decreasing with values in
    /// `[0, 1]`: `rise` freezes `h` after its peak, `fall` collects the descent.
    fn split_at_peak(&self) -> (StepFunction, StepFunction) {
        let t = self.peak();
        let top = self.knots[t].1.clone();
        let rise = self
            .knots
            .iter()
            .enumerate()
            .map(|(i, (x, v))| (x.clone(), if i <= t { v.clone() } else { top.clone() }))
            .collect();
        let fall = self
            .knots
            .iter()
            .enumerate()
            .map(|(i, (x, v))| (x.clone(), if i <= t { BigRational::zero() } else { &top - v }))
            .collect();
        (StepFunction { knots: rise }, StepFunction { knots: fall })
    }

    fn shift_difference(&self, y: &DiscreteDistribution, s: &BigRational) -> BigRational {
        y.expect(|x| self.eval(&(x + s))) - y.expect(|x| self.eval(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "shape")]
pub enum ShapeClaim {
    Increasing,
    /// Unimodal on `[a, b]`, with `Y` supported in `[a, b - s]`.
    Unimodal {
        a: String,
        b: String,
    },
}

impl ShapeClaim {
    pub fn unimodal(a: &BigRational, b: &BigRational) -> Self {
        ShapeClaim::Unimodal {
            a: a.to_string(),
            b: b.to_string(),
        }
    }

    fn bounds(&self) -> Result<Option<(BigRational, BigRational)>> {
        match self {
            ShapeClaim::Increasing => Ok(None),
            ShapeClaim::Unimodal { a, b } => {
                let parse = |t: &str| {
                    t.parse::<BigRational>()
                        .map_err(|_| Error::Parse(format!("bad rational {t:?}")))
                };
                Ok(Some((parse(a)?, parse(b)?)))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftReport {
    /// `E h(Y + s) - E h(Y)`.
    pub lhs: BigRational,
    pub q: BigRational,
    /// `Q` in the increasing case, `2Q` in the unimodal case.
    pub bound: BigRational,
    pub pass: bool,
    /// Shift differences of the two increasing pieces in the unimodal case.
    pub pieces: Option<(BigRational, BigRational)>,
}

pub fn unimodal_shift_check(
    h: &StepFunction,
    y: &DiscreteDistribution,
    s: &BigRational,
    claim: &ShapeClaim,
) -> Result<ShiftReport> {
    if !s.is_positive() {
        return Err(Error::argument("the shift s must be positive"));
    }
    let lhs = h.shift_difference(y, s);
    let q = y.exact_q(s);
    let (bound, pieces) = match claim.bounds()? {
        None => {
            if !h.is_non_decreasing() {
                return Err(Error::argument("h is declared increasing but decreases somewhere"));
            }
            (q.clone(), None)
        }
        Some((a, b)) => {
            if !h.is_unimodal() {
                return Err(Error::argument("h is declared unimodal but is not"));
            }
            let hi = &b - s;
            let lo = y.support().first().expect("non-empty");
            let top = y.support().last().expect("non-empty");
            if *lo < a || *top > hi {
                return Err(Error::argument(format!(
                    "support hypothesis P(Y in [a, b - s]) = 1 fails: Y spans [{lo}, {top}], [a, b - s] = [{a}, {hi}]"
                )));
            }
            let (rise, fall) = h.split_at_peak();
            let pieces = (rise.shift_difference(y, s), fall.shift_difference(y, s));
            debug_assert_eq!(&pieces.0 - &pieces.1, lhs);
            (&q + &q, Some(pieces))
        }
    };
    let pass = lhs.abs() <= bound;
    Ok(ShiftReport {
        lhs,
        q,
        bound,
        pass,
        pieces,
    })
}

fn random_rational<R: Rng + ?Sized>(rng: &mut R, lo: i64, hi: i64) -> BigRational {
    let den = rng.random_range(1..=6i64);
    ratio(rng.random_range(lo * den..=hi * den), den)
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> BigRational {
    let den = rng.random_range(1..=12i64);
    ratio(rng.random_range(0..=den), den)
}

/// One random instance `(h, Y, s, claim)` of the requested shape. Knots are
/// partly drawn at atoms of `Y` and at atoms shifted by `s`, where jumps of
/// `h` change the difference the most.
pub fn random_shift_trial<R: Rng + ?Sized>(
    unimodal: bool,
    rng: &mut R,
) -> (StepFunction, DiscreteDistribution, BigRational, ShapeClaim) {
    let atoms = rng.random_range(1..=12usize);
    let y = DiscreteDistribution::new({
        let weights: Vec<i64> = (0..atoms).map(|_| rng.random_range(1..=20)).collect();
        let total: i64 = weights.iter().sum();
        weights
            .into_iter()
            .map(|w| (random_rational(rng, 0, 10), ratio(w, total)))
            .collect()
    })
    .expect("weights sum to one");
    let s = ratio(rng.random_range(1..=30), rng.random_range(1..=6));

    let mut xs: Vec<BigRational> = (0..rng.random_range(1..=8usize))
        .map(|_| match rng.random_range(0..3) {
            0 => random_rational(rng, -2, 14),
            1 => y.support()[rng.random_range(0..y.support().len())].clone(),
            _ => &y.support()[rng.random_range(0..y.support().len())] + &s,
        })
        .collect();
    xs.sort();
    xs.dedup();
    let mut vs: Vec<BigRational> = (0..xs.len()).map(|_| random_unit(rng)).collect();

    let claim = if unimodal {
        let t = rng.random_range(0..vs.len());
        vs[..=t].sort();
        vs[t..].sort_by(|a, b| b.cmp(a));
        let lo = y.support().first().expect("non-empty") - random_rational(rng, 0, 2);
        let hi = y.support().last().expect("non-empty") + &s + random_rational(rng, 0, 2);
        ShapeClaim::unimodal(&lo, &hi)
    } else {
        vs.sort();
        ShapeClaim::Increasing
    };
    let h = StepFunction::new(xs.into_iter().zip(vs).collect()).expect("valid knots");
    (h, y, s, claim)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub unimodal: bool,
    pub trials: u64,
    pub violations: u64,
    /// Largest `|lhs| / bound` seen over trials with a positive bound.
    pub worst_ratio: f64,
}

/// `trials` random checks; trial `i` uses stream `i` of `master_seed`.
pub fn shift_fuzz(trials: u64, unimodal: bool, master_seed: u64) -> Result<FuzzSummary> {
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for i in 0..trials {
        let (h, y, s, claim) = random_shift_trial(unimodal, &mut stream(master_seed, i));
        let r = unimodal_shift_check(&h, &y, &s, &claim)?;
        if !r.pass {
            violations += 1;
        }
        if r.bound.is_positive() {
            let q = (r.lhs.abs() / &r.bound).to_f64().unwrap_or(f64::INFINITY);
            worst_ratio = worst_ratio.max(q);
        }
    }
    Ok(FuzzSummary {
        unimodal,
        trials,
        violations,
        worst_ratio,
    })
}
