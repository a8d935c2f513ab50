//! Orderings of the agents' values.
//!
//! A permutation is written in one-line form `[π(0), π(1), ...]`: the agent
//! listed first is ranked highest. `π` is consistent with a value vector `v`
//! when `v[π(0)] >= v[π(1)] >= ...`; ties make several permutations
//! consistent at once. The statistic `xi(π, v)` is `1/k` for each of the `k`
//! consistent permutations and `0` otherwise, so it sums to one over all
//! permutations.

mod convergence;
mod coverage;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use convergence::{
    summarize_xi, xi_convergence_estimate, xi_race_config, xi_replicate, XiConvergenceReport, XiConvergenceSpec,
    XiEstimate, MIN_XI_REPLICATES,
};
pub use coverage::{CoverageEntry, CoverageReport, PermutationCoverage, Stamp, TiePolicy, MAX_COVERAGE_AGENTS};

/// Largest `A` for which `A!` fits in a `u64`.
pub const MAX_XI_AGENTS: usize = 20;
/// Up to this many agents the number of consistent permutations is counted
/// by enumerating all of them.
pub const ENUMERATION_LIMIT: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(one_line: Vec<usize>) -> Result<Self> {
        let n = one_line.len();
        let mut seen = vec![false; n];
        for &x in &one_line {
            if x >= n || std::mem::replace(&mut seen[x], true) {
                return Err(Error::argument(format!("{one_line:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(Permutation(one_line))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Position in lexicographic order, starting at 0.
    pub fn rank(&self) -> usize {
        rank_of(&self.0)
    }

    pub fn unrank(n: usize, mut rank: usize) -> Result<Self> {
        let total = factorial(n)
            .filter(|&t| (rank as u64) < t)
            .ok_or_else(|| Error::argument(format!("rank {rank} out of range for permutations of {n}")))?;
        let mut pool: Vec<usize> = (0..n).collect();
        let mut out = Vec::with_capacity(n);
        let mut block = total;
        for k in (1..=n).rev() {
            block /= k as u64;
            let i = rank / block as usize;
            rank %= block as usize;
            out.push(pool.remove(i));
        }
        Ok(Permutation(out))
    }

    /// All permutations of `0..n` in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        let total = factorial(n).expect("n! fits in u64") as usize;
        (0..total).map(move |r| Permutation::unrank(n, r).expect("rank in range"))
    }

    /// `v[π(0)] >= v[π(1)] >= ...`.
    pub fn is_consistent_with(&self, values: &[u64]) -> bool {
        self.0.windows(2).all(|w| values[w[0]] >= values[w[1]])
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn rank_of(one_line: &[usize]) -> usize {
    let n = one_line.len();
    let mut rank = 0usize;
    for i in 0..n {
        let smaller_after = one_line[i + 1..].iter().filter(|&&x| x < one_line[i]).count();
        rank = rank * (n - i) + smaller_after;
    }
    rank
}

pub fn factorial(n: usize) -> Option<u64> {
    (1..=n as u64).try_fold(1u64, |acc, k| acc.checked_mul(k))
}

/// Exact value of `xi(π, v)`: zero, or one over the number of consistent
/// permutations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankWeight {
    pub numerator: u8,
    pub denominator: u64,
}

impl RankWeight {
    pub const ZERO: RankWeight = RankWeight {
        numerator: 0,
        denominator: 1,
    };

    pub fn reciprocal(denominator: u64) -> Self {
        RankWeight {
            numerator: 1,
            denominator,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.numerator == 0
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(self.numerator), BigInt::from(self.denominator))
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl fmt::Display for RankWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.numerator, self.denominator) {
            (0, _) => write!(f, "0"),
            (_, 1) => write!(f, "1"),
            (_, d) => write!(f, "1/{d}"),
        }
    }
}

/// Agents sorted by value, highest first, ties by index; with the sizes of
/// the tie groups in that order.
pub(crate) fn descending_order(values: &[u64]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].cmp(&values[a]).then(a.cmp(&b)));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    (order, groups)
}

/// Number of consistent permutations as the product of the factorials of
/// the tie-group sizes.
pub fn tie_group_count(values: &[u64]) -> Result<u64> {
    let (_, groups) = descending_order(values);
    groups
        .iter()
        .try_fold(1u64, |acc, &g| factorial(g).and_then(|f| acc.checked_mul(f)))
        .ok_or_else(|| Error::argument(format!("{} agents exceed the supported {MAX_XI_AGENTS}", values.len())))
}

/// Number of consistent permutations by walking the tree of all `A!`
/// permutations, pruning a branch as soon as its prefix breaks the chain.
pub fn enumerated_count(values: &[u64]) -> Result<u64> {
    if values.len() > ENUMERATION_LIMIT {
        return Err(Error::argument(format!(
            "enumeration is limited to {ENUMERATION_LIMIT} agents, got {}",
            values.len()
        )));
    }
    fn walk(values: &[u64], used: &mut [bool], last: u64, depth: usize) -> u64 {
        if depth == values.len() {
            return 1;
        }
        let mut count = 0;
        for a in 0..values.len() {
            if !used[a] && values[a] <= last {
                used[a] = true;
                count += walk(values, used, values[a], depth + 1);
                used[a] = false;
            }
        }
        count
    }
    Ok(walk(values, &mut vec![false; values.len()], u64::MAX, 0))
}

fn consistent_count(values: &[u64]) -> Result<u64> {
    if values.len() <= ENUMERATION_LIMIT {
        enumerated_count(values)
    } else {
        tie_group_count(values)
    }
}

pub fn xi(pi: &Permutation, values: &[u64]) -> Result<RankWeight> {
    if pi.len() != values.len() {
        return Err(Error::argument(format!(
            "permutation of {} agents applied to {} values",
            pi.len(),
            values.len()
        )));
    }
    if values.len() > MAX_XI_AGENTS {
        return Err(Error::argument(format!("xi supports at most {MAX_XI_AGENTS} agents")));
    }
    if !pi.is_consistent_with(values) {
        return Ok(RankWeight::ZERO);
    }
    Ok(RankWeight::reciprocal(consistent_count(values)?))
}

/// Every permutation consistent with `values`, in lexicographic order.
pub fn consistent_orderings(values: &[u64]) -> Vec<Permutation> {
    let mut out = Vec::new();
    for_each_consistent(values, |p| out.push(Permutation(p.to_vec())));
    out.sort();
    out
}

/// Visit each consistent permutation in one-line form: every arrangement of
/// the agents within each tie group.
pub(crate) fn for_each_consistent<F: FnMut(&[usize])>(values: &[u64], mut visit: F) {
    let (mut order, groups) = descending_order(values);
    let mut starts = Vec::with_capacity(groups.len());
    let mut s = 0;
    for &g in &groups {
        starts.push(s);
        s += g;
    }
    permute_groups(&mut order, &groups, &starts, 0, &mut visit);
}

fn permute_groups<F: FnMut(&[usize])>(
    order: &mut [usize],
    groups: &[usize],
    starts: &[usize],
    g: usize,
    visit: &mut F,
) {
    if g == groups.len() {
        visit(order);
        return;
    }
    let (lo, len) = (starts[g], groups[g]);
    heap_permute(order, lo, len, &mut |o: &mut [usize]| {
        permute_groups(o, groups, starts, g + 1, visit)
    });
}

/// Heap's algorithm on `order[lo..lo + len]`.
fn heap_permute(order: &mut [usize], lo: usize, len: usize, visit: &mut dyn FnMut(&mut [usize])) {
    if len <= 1 {
        visit(order);
        return;
    }
    let mut c = vec![0usize; len];
    visit(order);
    let mut i = 1;
    while i < len {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            order.swap(lo + j, lo + i);
            visit(order);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
