//! Balls-in-bins with feedback: a bin holding `m` balls receives the next
//! ball with probability proportional to `f(m)`.

mod coupling;

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{FeedbackCache, FeedbackFunction};

pub use coupling::{
    coupling_equivalence_test, exact_sequence_distribution, sample_chain_sequence, Arithmetic, CouplingReport,
    ExactSequenceDistribution, SequenceRow, MAX_OUTCOME_BITS, MIN_COUPLING_REPLICATES,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UrnState {
    counts: Vec<u64>,
    step: u64,
}

impl UrnState {
    /// Initial state; every bin must start with at least one ball.
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::argument(format!(
                "an urn needs at least 2 bins, got {}",
                counts.len()
            )));
        }
        if counts.contains(&0) {
            return Err(Error::argument("initial bin counts must be >= 1"));
        }
        Ok(UrnState { counts, step: 0 })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the fullest bin, lowest index on ties.
    pub fn leader(&self) -> usize {
        let max = *self.counts.iter().max().expect("non-empty");
        self.counts.iter().position(|&c| c == max).expect("max exists")
    }
}

/// Samples bins in proportion to `f(count)`, reusing weights between steps.
///
/// Weights are kept in linear scale while every `f(u_a)` and their sum are
/// finite. Otherwise they are rebuilt as `exp(ln f(u_a) - max_b ln f(u_b))`;
/// the common factor leaves the sampling probabilities unchanged.
#[derive(Clone, Debug)]
pub struct BinSelector {
    cache: FeedbackCache,
    weights: Vec<f64>,
    counts_seen: Vec<u64>,
    rescaled: bool,
}

impl BinSelector {
    pub fn new(f: FeedbackFunction) -> Self {
        BinSelector {
            cache: FeedbackCache::new(f),
            weights: Vec::new(),
            counts_seen: Vec::new(),
            rescaled: false,
        }
    }

    /// Selection probabilities for `counts`, as used by [`select`](Self::select).
    pub fn probabilities(&mut self, counts: &[u64]) -> Result<Vec<f64>> {
        self.refresh(counts)?;
        let total: f64 = self.weights.iter().sum();
        Ok(self.weights.iter().map(|w| w / total).collect())
    }

    fn refresh(&mut self, counts: &[u64]) -> Result<()> {
        if !self.rescaled && self.counts_seen.len() == counts.len() {
            let mut ok = true;
            for a in 0..counts.len() {
                if self.counts_seen[a] != counts[a] {
                    match self.cache.rate(counts[a]) {
                        Ok(w) => {
                            self.weights[a] = w;
                            self.counts_seen[a] = counts[a];
                        }
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if ok && self.weights.iter().sum::<f64>().is_finite() {
                return Ok(());
            }
        }
        self.rebuild(counts)
    }

    fn rebuild(&mut self, counts: &[u64]) -> Result<()> {
        self.counts_seen = counts.to_vec();
        let linear: Result<Vec<f64>> = counts.iter().map(|&c| self.cache.rate(c)).collect();
        if let Ok(w) = linear {
            if w.iter().sum::<f64>().is_finite() {
                self.weights = w;
                self.rescaled = false;
                return Ok(());
            }
        }
        let f = self.cache.function();
        let logs: Vec<f64> = counts.iter().map(|&c| f.ln_eval(c)).collect();
        if logs.iter().any(|l| !l.is_finite()) {
            return Err(Error::numeric(format!(
                "feedback {f} is not representable at counts {counts:?}; rescale f"
            )));
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.weights = logs.iter().map(|l| (l - max).exp()).collect();
        self.rescaled = true;
        Ok(())
    }

    /// Draw a bin index for the current `counts`.
    #[inline]
    pub fn select<R: Rng + ?Sized>(&mut self, counts: &[u64], rng: &mut R) -> Result<usize> {
        self.refresh(counts)?;
        let total: f64 = self.weights.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (a, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return Ok(a);
            }
        }
        // u landed on the rounding gap at the top; take the last positive weight.
        Ok(self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0))
    }
}

impl UrnState {
    /// Add one ball, chosen by `selector`. Returns the chosen bin.
    pub fn advance<R: Rng + ?Sized>(&mut self, selector: &mut BinSelector, rng: &mut R) -> Result<usize> {
        let a = selector.select(&self.counts, rng)?;
        self.counts[a] += 1;
        self.step += 1;
        Ok(a)
    }
}

/// One step of the process, returning the successor state.
pub fn urn_step<R: Rng + ?Sized>(state: &UrnState, f: &FeedbackFunction, rng: &mut R) -> Result<UrnState> {
    let mut next = state.clone();
    next.advance(&mut BinSelector::new(f.clone()), rng)?;
    Ok(next)
}

/// Apply `steps` steps, calling `observer` after each one.
pub fn run_urn<R, O>(
    initial: UrnState,
    f: &FeedbackFunction,
    steps: u64,
    rng: &mut R,
    mut observer: O,
) -> Result<UrnState>
where
    R: Rng + ?Sized,
    O: FnMut(&UrnState),
{
    let mut state = initial;
    let mut selector = BinSelector::new(f.clone());
    for _ in 0..steps {
        state.advance(&mut selector, rng)?;
        observer(&state);
    }
    Ok(state)
}

/// CSV export of urn trajectories: `step,c0,c1,...`.
pub struct UrnCsvWriter<W: Write> {
    writer: W,
}

impl<W: Write> UrnCsvWriter<W> {
    pub fn new(mut writer: W, bins: usize) -> io::Result<Self> {
        writer.write_all(b"step")?;
        for a in 0..bins {
            write!(writer, ",c{a}")?;
        }
        writer.write_all(b"\n")?;
        Ok(UrnCsvWriter { writer })
    }

    pub fn row(&mut self, state: &UrnState) -> io::Result<()> {
        write!(self.writer, "{}", state.step)?;
        for c in &state.counts {
            write!(self.writer, ",{c}")?;
        }
        self.writer.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.writer.flush()?;
        Ok(self.writer)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn initial_counts_must_be_positive() {
        assert!(UrnState::new(vec![1, 0]).is_err());
        assert!(UrnState::new(vec![3]).is_err());
        assert_eq!(UrnState::new(vec![2, 5]).unwrap().total(), 7);
    }

    #[test]
    fn one_step_adds_one_ball() {
        let f = FeedbackFunction::power(1.0).unwrap();
        let s0 = UrnState::new(vec![2, 1, 4]).unwrap();
        let s1 = urn_step(&s0, &f, &mut rng(0)).unwrap();
        let diffs: Vec<u64> = s1.counts().iter().zip(s0.counts()).map(|(a, b)| a - b).collect();
        assert_eq!(diffs.iter().sum::<u64>(), 1);
        assert!(diffs.iter().all(|&d| d <= 1));
        assert_eq!(s1.step(), 1);
    }

    #[test]
    fn zero_steps_is_identity() {
        let f = FeedbackFunction::constant(1.0).unwrap();
        let s0 = UrnState::new(vec![3, 1]).unwrap();
        let mut calls = 0;
        let out = run_urn(s0.clone(), &f, 0, &mut rng(1), |_| calls += 1).unwrap();
        assert_eq!(out, s0);
        assert_eq!(calls, 0);
    }

    #[test]
    fn conservation_over_a_run() {
        let f = FeedbackFunction::power(0.5).unwrap();
        let s0 = UrnState::new(vec![1, 2, 3]).unwrap();
        let mut last_total = s0.total();
        let out = run_urn(s0, &f, 1000, &mut rng(2), |s| {
            assert_eq!(s.total(), last_total + 1);
            last_total = s.total();
        })
        .unwrap();
        assert_eq!(out.total(), 6 + 1000);
        assert_eq!(out.step(), 1000);
    }

    #[test]
    fn linear_feedback_probabilities_are_exact() {
        // f(m) = m + 1 at counts (2, 1): weights 3 and 2.
        let mut sel = BinSelector::new(FeedbackFunction::power(1.0).unwrap());
        assert_eq!(sel.probabilities(&[2, 1]).unwrap(), vec![0.6, 0.4]);
    }

    #[test]
    fn rescaling_preserves_ratios() {
        // (m+1)^400 overflows f64; only ratios matter.
        let big = FeedbackFunction::power(400.0).unwrap();
        let mut sel = BinSelector::new(big);
        let p = sel.probabilities(&[10, 10, 9]).unwrap();
        let ratio = (10.0f64 / 11.0).powi(400);
        assert!((p[0] - p[1]).abs() < 1e-15);
        assert!((p[2] / p[0] - ratio).abs() < 1e-12 * ratio.max(1e-300));
        assert!(sel.rescaled);

        let small = FeedbackFunction::power(4.0).unwrap();
        let counts = [30u64, 20, 25];
        let direct: Vec<f64> = counts.iter().map(|&c| small.eval(c)).collect();
        let total: f64 = direct.iter().sum();
        let mut scaled = BinSelector::new(small);
        scaled.rebuild(&counts).unwrap();
        scaled.weights.iter_mut().for_each(|w| *w *= 1e-200);
        let t2: f64 = scaled.weights.iter().sum();
        for (w, d) in scaled.weights.iter().zip(&direct) {
            assert!((w / t2 - d / total).abs() < 1e-14);
        }
    }

    #[test]
    fn unrepresentable_logs_error() {
        let f = FeedbackFunction::custom("nan", |_| f64::NAN);
        let s0 = UrnState::new(vec![1, 1]).unwrap();
        assert!(matches!(urn_step(&s0, &f, &mut rng(0)), Err(Error::NumericRange(_))));
    }

    #[test]
    fn csv_export() {
        let f = FeedbackFunction::constant(1.0).unwrap();
        let mut csv = UrnCsvWriter::new(Vec::new(), 2).unwrap();
        let s0 = UrnState::new(vec![1, 1]).unwrap();
        csv.row(&s0).unwrap();
        run_urn(s0, &f, 3, &mut rng(4), |s| csv.row(s).unwrap()).unwrap();
        let text = String::from_utf8(csv.finish().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,c0,c1");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("3,"));
    }
}
