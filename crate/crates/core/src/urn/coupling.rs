//! Distributional check of the exponential-clock embedding of the urn.
//!
//! The urn's first `k` draws have an exactly computable law. Racing
//! independent clocks with `X_j ~ Exp(f(j - 1))` from the same initial
//! counts and reading off which agent jumps at each of the first `k` global
//! events must reproduce that law.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{make_exponential_model, FeedbackFunction, WaitingTimeModel};
use crate::race::{run_race, Horizon, RaceConfig, RaceEvent};
use crate::stats::{chi_square_test, ChiSquareTest};

/// The outcome space `A^k` may hold at most `2^MAX_OUTCOME_BITS` sequences.
pub const MAX_OUTCOME_BITS: f64 = 20.0;
pub const MIN_COUPLING_REPLICATES: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    /// `f` is integer-valued on every count the first `k` draws can visit;
    /// probabilities are exact rationals.
    Rational,
    Float,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSequenceDistribution {
    pub agents: usize,
    pub k: usize,
    pub arithmetic: Arithmetic,
    /// Indexed by the base-`A` number whose most significant digit is the first draw.
    pub probabilities: Vec<f64>,
    pub rational: Option<Vec<BigRational>>,
}

impl ExactSequenceDistribution {
    pub fn sequence(&self, index: usize) -> Vec<usize> {
        decode_sequence(index, self.agents, self.k)
    }
}

fn decode_sequence(mut index: usize, agents: usize, k: usize) -> Vec<usize> {
    let mut seq = vec![0; k];
    for slot in seq.iter_mut().rev() {
        *slot = index % agents;
        index /= agents;
    }
    seq
}

fn check_outcome_space(agents: usize, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::argument("k must be at least 1"));
    }
    if k as f64 * (agents as f64).log2() > MAX_OUTCOME_BITS + 1e-9 {
        return Err(Error::argument(format!(
            "outcome space {agents}^{k} exceeds 2^{MAX_OUTCOME_BITS} sequences"
        )));
    }
    Ok(agents.pow(k as u32))
}

fn check_initial(initial: &[u64]) -> Result<()> {
    if initial.len() < 2 || initial.contains(&0) {
        return Err(Error::argument("coupling needs >= 2 bins with initial counts >= 1"));
    }
    Ok(())
}

/// Exact law of the first `k` urn draws by enumeration.
pub fn exact_sequence_distribution(
    f: &FeedbackFunction,
    initial: &[u64],
    k: usize,
) -> Result<ExactSequenceDistribution> {
    check_initial(initial)?;
    let agents = initial.len();
    let cells = check_outcome_space(agents, k)?;

    let lo = *initial.iter().min().expect("non-empty");
    let hi = *initial.iter().max().expect("non-empty") + k as u64;
    let table: Vec<f64> = (lo..hi).map(|m| f.rate(m)).collect::<Result<_>>()?;
    let integral = table.iter().all(|&v| v.fract() == 0.0 && v < 9_007_199_254_740_992.0);
    let weight = |c: u64| table[(c - lo) as usize];

    let mut probabilities = vec![0.0; cells];
    let mut counts = initial.to_vec();
    enumerate_float(&mut counts, k, 0, 1.0, &weight, &mut probabilities);

    let rational = if integral {
        let mut exact = vec![BigRational::zero(); cells];
        let mut counts = initial.to_vec();
        let int_weight = |c: u64| BigInt::from(weight(c) as u64);
        enumerate_rational(&mut counts, k, 0, BigRational::one(), &int_weight, &mut exact);
        for (p, r) in probabilities.iter_mut().zip(&exact) {
            *p = r.to_f64().expect("probability in [0, 1]");
        }
        Some(exact)
    } else {
        None
    };

    Ok(ExactSequenceDistribution {
        agents,
        k,
        arithmetic: if integral {
            Arithmetic::Rational
        } else {
            Arithmetic::Float
        },
        probabilities,
        rational,
    })
}

fn enumerate_float(counts: &mut [u64], left: usize, prefix: usize, p: f64, w: &dyn Fn(u64) -> f64, out: &mut [f64]) {
    if left == 0 {
        out[prefix] = p;
        return;
    }
    let total: f64 = counts.iter().map(|&c| w(c)).sum();
    for a in 0..counts.len() {
        let q = w(counts[a]) / total;
        counts[a] += 1;
        enumerate_float(counts, left - 1, prefix * counts.len() + a, p * q, w, out);
        counts[a] -= 1;
    }
}

fn enumerate_rational(
    counts: &mut [u64],
    left: usize,
    prefix: usize,
    p: BigRational,
    w: &dyn Fn(u64) -> BigInt,
    out: &mut [BigRational],
) {
    if left == 0 {
        out[prefix] = p;
        return;
    }
    let total: BigInt = counts.iter().map(|&c| w(c)).sum();
    for a in 0..counts.len() {
        let q = BigRational::new(w(counts[a]), total.clone());
        counts[a] += 1;
        enumerate_rational(counts, left - 1, prefix * counts.len() + a, &p * q, w, out);
        counts[a] -= 1;
    }
}

/// Race exponential clocks from `initial` for `k` events; return the index
/// of the observed jumper sequence (same encoding as the exact law).
pub fn sample_chain_sequence<R: Rng + ?Sized>(
    model: &WaitingTimeModel,
    initial: &[u64],
    k: usize,
    rng: &mut R,
) -> Result<usize> {
    let cfg = RaceConfig::new(initial.to_vec(), model.clone(), Horizon::Events(k as u64))?;
    let agents = initial.len();
    let mut index = 0usize;
    let summary = run_race(&cfg, rng, &mut |e: &RaceEvent, _: &[u64]| {
        index = index * agents + e.agent;
    })?;
    if summary.events < k as u64 {
        return Err(Error::numeric(format!(
            "race produced {} of {k} events before exploding",
            summary.events
        )));
    }
    Ok(index)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    /// Bins in draw order, numbered from 0.
    pub sequence: Vec<usize>,
    pub exact: f64,
    /// Exact probability as `num/den`, when computed in rationals.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact_rational: Option<String>,
    pub observed: u64,
    pub observed_frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub agents: usize,
    pub k: usize,
    pub arithmetic: Arithmetic,
    pub replicates: u64,
    pub rows: Vec<SequenceRow>,
    pub chi_square: ChiSquareTest,
}

impl CouplingReport {
    pub fn from_counts(exact: &ExactSequenceDistribution, observed: &[u64]) -> Result<Self> {
        let replicates: u64 = observed.iter().sum();
        let chi_square = chi_square_test(observed, &exact.probabilities)?;
        let rows = observed
            .iter()
            .enumerate()
            .map(|(i, &o)| SequenceRow {
                sequence: exact.sequence(i),
                exact: exact.probabilities[i],
                exact_rational: exact.rational.as_ref().map(|r| r[i].to_string()),
                observed: o,
                observed_frequency: o as f64 / replicates as f64,
            })
            .collect();
        Ok(CouplingReport {
            agents: exact.agents,
            k: exact.k,
            arithmetic: exact.arithmetic,
            replicates,
            rows,
            chi_square,
        })
    }
}

/// Compare the exact urn law of the first `k` draws with the jump chain of
/// `replicates` exponential races.
pub fn coupling_equivalence_test<R: Rng + ?Sized>(
    f: &FeedbackFunction,
    initial: &[u64],
    k: usize,
    replicates: u64,
    rng: &mut R,
) -> Result<CouplingReport> {
    if replicates < MIN_COUPLING_REPLICATES {
        return Err(Error::argument(format!(
            "coupling test needs >= {MIN_COUPLING_REPLICATES} replicates, got {replicates}"
        )));
    }
    let exact = exact_sequence_distribution(f, initial, k)?;
    let model = make_exponential_model(f.clone());
    let mut observed = vec![0u64; exact.probabilities.len()];
    for _ in 0..replicates {
        observed[sample_chain_sequence(&model, initial, k, rng)?] += 1;
    }
    CouplingReport::from_counts(&exact, &observed)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn symmetric_single_draw() {
        let f = FeedbackFunction::constant(1.0).unwrap();
        let d = exact_sequence_distribution(&f, &[1, 1], 1).unwrap();
        assert_eq!(d.probabilities, vec![0.5, 0.5]);
        assert_eq!(d.arithmetic, Arithmetic::Rational);
    }

    #[test]
    fn linear_feedback_two_draws_by_hand() {
        // f(m) = m + 1 from (1, 1): first draw 1/2 each; then the drawn bin has
        // weight 3 against 2.
        let f = FeedbackFunction::power(1.0).unwrap();
        let d = exact_sequence_distribution(&f, &[1, 1], 2).unwrap();
        let want = [(3, 10), (2, 10), (2, 10), (3, 10)];
        let exact = d.rational.as_ref().unwrap();
        for (i, (n, den)) in want.into_iter().enumerate() {
            assert_eq!(exact[i], BigRational::new(n.into(), den.into()));
        }
        assert_eq!(d.sequence(1), vec![0, 1]);
    }

    #[test]
    fn irrational_feedback_falls_back_to_float() {
        let f = FeedbackFunction::power(0.5).unwrap();
        let d = exact_sequence_distribution(&f, &[1, 2, 1], 3).unwrap();
        assert_eq!(d.arithmetic, Arithmetic::Float);
        assert!(d.rational.is_none());
        assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outcome_space_limit() {
        let f = FeedbackFunction::constant(1.0).unwrap();
        assert!(exact_sequence_distribution(&f, &[1, 1], 20).is_ok());
        assert!(exact_sequence_distribution(&f, &[1, 1], 21).is_err());
        assert!(exact_sequence_distribution(&f, &[1, 1, 1, 1], 11).is_err());
        assert!(exact_sequence_distribution(&f, &[1, 1], 0).is_err());
        assert!(exact_sequence_distribution(&f, &[1, 0], 1).is_err());
    }

    #[test]
    fn replicate_floor_enforced() {
        let f = FeedbackFunction::constant(1.0).unwrap();
        let r = coupling_equivalence_test(&f, &[1, 1], 1, 100, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn coupling_holds_for_linear_feedback() {
        let f = FeedbackFunction::power(1.0).unwrap();
        let report = coupling_equivalence_test(&f, &[1, 1], 2, 20_000, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
        assert_eq!(report.chi_square.degrees_of_freedom, 3);
        assert!(report.chi_square.p_value > 1e-3, "{report:?}");
        assert_eq!(report.rows[0].exact_rational.as_deref(), Some("3/10"));
    }
}
