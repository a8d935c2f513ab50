use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{descending_order, factorial, for_each_consistent, rank_of, Permutation};
use crate::error::{Error, Result};

/// `8! = 40320` permutations; beyond this full coverage is out of reach anyway.
pub const MAX_COVERAGE_AGENTS: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Ties count: a snapshot marks every consistent permutation.
    #[default]
    Weak,
    /// Only snapshots with all values distinct count.
    Strict,
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiePolicy::Weak => "weak",
            TiePolicy::Strict => "strict",
        })
    }
}

/// When a snapshot was taken: an urn step or a race time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Stamp {
    Step(u64),
    Time(f64),
}

impl PartialOrd for Stamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Stamp::Step(a), Stamp::Step(b)) => a.partial_cmp(b),
            (Stamp::Time(a), Stamp::Time(b)) => a.partial_cmp(b),
            _ => None,
        }
    }
}

/// Which permutations have been observed, and when each was first seen.
#[derive(Clone, Debug)]
pub struct PermutationCoverage {
    agents: usize,
    policy: TiePolicy,
    seen: Vec<u64>,
    first_hit: Vec<Option<Stamp>>,
    bits_set: usize,
    last_order: Option<(Vec<usize>, Vec<usize>)>,
}

impl PartialEq for PermutationCoverage {
    fn eq(&self, other: &Self) -> bool {
        self.agents == other.agents
            && self.policy == other.policy
            && self.seen == other.seen
            && self.first_hit == other.first_hit
    }
}

impl PermutationCoverage {
    pub fn new(agents: usize, policy: TiePolicy) -> Result<Self> {
        if !(2..=MAX_COVERAGE_AGENTS).contains(&agents) {
            return Err(Error::argument(format!(
                "coverage tracking needs 2..={MAX_COVERAGE_AGENTS} agents, got {agents}"
            )));
        }
        let total = factorial(agents).expect("small factorial") as usize;
        Ok(PermutationCoverage {
            agents,
            policy,
            seen: vec![0; total.div_ceil(64)],
            first_hit: vec![None; total],
            bits_set: 0,
            last_order: None,
        })
    }

    /// Rebuild a tracker from its first-hit stamps, indexed by lexicographic rank.
    pub fn from_first_hits(agents: usize, policy: TiePolicy, first_hits: Vec<Option<Stamp>>) -> Result<Self> {
        let mut c = Self::new(agents, policy)?;
        if first_hits.len() != c.total() {
            return Err(Error::argument(format!(
                "{} first-hit entries for {} permutations",
                first_hits.len(),
                c.total()
            )));
        }
        for (rank, hit) in first_hits.into_iter().enumerate() {
            if let Some(stamp) = hit {
                c.mark(rank, stamp);
            }
        }
        Ok(c)
    }

    pub fn first_hits(&self) -> &[Option<Stamp>] {
        &self.first_hit
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn policy(&self) -> TiePolicy {
        self.policy
    }

    pub fn total(&self) -> usize {
        self.first_hit.len()
    }

    pub fn bits_set(&self) -> usize {
        self.bits_set
    }

    pub fn is_complete(&self) -> bool {
        self.bits_set == self.total()
    }

    pub fn is_seen(&self, rank: usize) -> bool {
        self.seen[rank / 64] >> (rank % 64) & 1 == 1
    }

    pub fn first_hit(&self, rank: usize) -> Option<Stamp> {
        self.first_hit[rank]
    }

    fn mark(&mut self, rank: usize, stamp: Stamp) {
        if !self.is_seen(rank) {
            self.seen[rank / 64] |= 1 << (rank % 64);
            self.first_hit[rank] = Some(stamp);
            self.bits_set += 1;
        }
    }

    /// Record the snapshot `values` taken at `stamp`. Stamps are expected in
    /// non-decreasing order.
    pub fn update(&mut self, values: &[u64], stamp: Stamp) -> Result<()> {
        if values.len() != self.agents {
            return Err(Error::argument(format!(
                "tracker for {} agents given {} values",
                self.agents,
                values.len()
            )));
        }
        if self.is_complete() {
            return Ok(());
        }
        let order = descending_order(values);
        if self.last_order.as_ref() == Some(&order) {
            return Ok(());
        }
        let all_distinct = order.1.len() == self.agents;
        match self.policy {
            TiePolicy::Strict if !all_distinct => {}
            TiePolicy::Strict => self.mark(rank_of(&order.0), stamp),
            TiePolicy::Weak if all_distinct => self.mark(rank_of(&order.0), stamp),
            TiePolicy::Weak => {
                let mut ranks = Vec::new();
                for_each_consistent(values, |p| ranks.push(rank_of(p)));
                for r in ranks {
                    self.mark(r, stamp);
                }
            }
        }
        self.last_order = Some(order);
        Ok(())
    }

    /// Union of observations; first hits take the earlier stamp.
    pub fn merge(&mut self, other: &PermutationCoverage) -> Result<()> {
        if self.agents != other.agents || self.policy != other.policy {
            return Err(Error::argument(format!(
                "cannot merge a {}-agent {} tracker into a {}-agent {} tracker",
                other.agents, other.policy, self.agents, self.policy
            )));
        }
        for (w, o) in self.seen.iter_mut().zip(&other.seen) {
            *w |= o;
        }
        for (mine, theirs) in self.first_hit.iter_mut().zip(&other.first_hit) {
            *mine = match (*mine, *theirs) {
                (Some(a), Some(b)) => Some(if b < a { b } else { a }),
                (a, b) => a.or(b),
            };
        }
        self.bits_set = self.seen.iter().map(|w| w.count_ones() as usize).sum();
        self.last_order = None;
        Ok(())
    }

    pub fn report(&self) -> CoverageReport {
        CoverageReport {
            agents: self.agents,
            policy: self.policy,
            bits_set: self.bits_set,
            total: self.total(),
            complete: self.is_complete(),
            permutations: (0..self.total())
                .map(|r| CoverageEntry {
                    permutation: Permutation::unrank(self.agents, r).expect("rank in range").into(),
                    first_hit: self.first_hit[r],
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub agents: usize,
    pub policy: TiePolicy,
    pub bits_set: usize,
    pub total: usize,
    pub complete: bool,
    /// In lexicographic order of the one-line form.
    pub permutations: Vec<CoverageEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub permutation: Vec<usize>,
    pub first_hit: Option<Stamp>,
}
