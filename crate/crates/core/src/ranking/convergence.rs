//! Monte Carlo estimate of `E[xi(π, (v_a(t + s_a))_a)]` for races started
//! from zero, with optional per-agent time shifts `s_a`.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{consistent_count, factorial, for_each_consistent, rank_of, Permutation, MAX_COVERAGE_AGENTS};
use crate::error::{Error, Result};
use crate::increments::WaitingTimeModel;
use crate::race::{simulate_race, Horizon, RaceConfig, DEFAULT_EVENT_CAP};
use crate::rng::stream;
use crate::stats::z_for_confidence;

pub const MIN_XI_REPLICATES: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiConvergenceSpec {
    pub agents: usize,
    pub model: WaitingTimeModel,
    pub times: Vec<f64>,
    /// Per-agent time shifts; empty means no shift.
    #[serde(default)]
    pub shifts: Vec<f64>,
    pub replicates: u64,
    pub master_seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_event_cap")]
    pub event_cap: u64,
}

fn default_event_cap() -> u64 {
    DEFAULT_EVENT_CAP
}

fn default_confidence() -> f64 {
    0.95
}

impl XiConvergenceSpec {
    pub fn new(agents: usize, model: WaitingTimeModel, times: Vec<f64>, replicates: u64, master_seed: u64) -> Self {
        XiConvergenceSpec {
            agents,
            model,
            times,
            shifts: Vec::new(),
            replicates,
            master_seed,
            confidence: default_confidence(),
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    pub fn with_shifts(mut self, shifts: Vec<f64>) -> Self {
        self.shifts = shifts;
        self
    }

    fn shift(&self, agent: usize) -> f64 {
        self.shifts.get(agent).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_COVERAGE_AGENTS).contains(&self.agents) {
            return Err(Error::argument(format!(
                "xi estimates cover all permutations; need 2..={MAX_COVERAGE_AGENTS} agents"
            )));
        }
        if self.replicates < MIN_XI_REPLICATES {
            return Err(Error::argument(format!(
                "xi convergence needs >= {MIN_XI_REPLICATES} replicates, got {}",
                self.replicates
            )));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::argument(
                "observation times must be a non-empty list of finite values >= 0",
            ));
        }
        if !self.shifts.is_empty() && self.shifts.len() != self.agents {
            return Err(Error::argument(format!(
                "{} shifts given for {} agents",
                self.shifts.len(),
                self.agents
            )));
        }
        if self.shifts.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::argument("shifts must be finite and >= 0"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::argument("confidence must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiEstimate {
    pub time: f64,
    pub permutation: Vec<usize>,
    pub mean: f64,
    /// The sample mean as an exact fraction.
    pub exact_mean: String,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl XiEstimate {
    /// `|mean - target|` in units of the standard error; zero when both
    /// coincide and the standard error vanishes.
    pub fn z_distance(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiConvergenceReport {
    pub agents: usize,
    pub shifts: Vec<f64>,
    pub replicates: u64,
    pub excluded: u64,
    pub confidence: f64,
    /// Grouped by time, then lexicographic in the permutation.
    pub estimates: Vec<XiEstimate>,
}

impl XiConvergenceReport {
    pub fn estimate(&self, time_index: usize, pi: &Permutation) -> &XiEstimate {
        let per_time = factorial(self.agents).expect("small factorial") as usize;
        &self.estimates[time_index * per_time + pi.rank()]
    }

    /// Exact sum of the sample means over all permutations at one time.
    pub fn exact_total(&self, time_index: usize) -> BigRational {
        let per_time = factorial(self.agents).expect("small factorial") as usize;
        self.estimates[time_index * per_time..(time_index + 1) * per_time]
            .iter()
            .map(|e| BigRational::from_str(&e.exact_mean).expect("well-formed fraction"))
            .sum()
    }
}

/// The race every replicate runs: all agents from zero up to the last
/// shifted observation time.
pub fn xi_race_config(spec: &XiConvergenceSpec) -> Result<RaceConfig> {
    let last = spec.times.iter().copied().fold(0.0, f64::max) + spec.shifts.iter().copied().fold(0.0, f64::max);
    Ok(RaceConfig::from_zero(spec.agents, spec.model.clone(), Horizon::Time(last))?.with_event_cap(spec.event_cap))
}

/// Values `v_a(t + s_a)` at each observation time for replicate `index`, or
/// `None` when the race exploded before the last time needed.
pub fn xi_replicate(spec: &XiConvergenceSpec, config: &RaceConfig, index: u64) -> Result<Option<Vec<Vec<u64>>>> {
    let traj = simulate_race(config, &mut stream(spec.master_seed, index))?;
    let mut out = Vec::with_capacity(spec.times.len());
    for &t in &spec.times {
        let mut values = Vec::with_capacity(spec.agents);
        for a in 0..spec.agents {
            match traj.value_at(a, t + spec.shift(a)) {
                Ok(v) => values.push(v),
                Err(Error::OutOfRange { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        out.push(values);
    }
    Ok(Some(out))
}

/// Runs on the current rayon pool; results do not depend on its size.
pub fn xi_convergence_estimate(spec: &XiConvergenceSpec) -> Result<XiConvergenceReport> {
    spec.validate()?;
    let config = xi_race_config(spec)?;
    let outcomes: Vec<Option<Vec<Vec<u64>>>> = (0..spec.replicates)
        .into_par_iter()
        .map(|i| xi_replicate(spec, &config, i))
        .collect::<Result<_>>()?;
    summarize_xi(spec, &outcomes)
}

/// Aggregate per-replicate snapshots (in replicate order) into estimates.
pub fn summarize_xi(spec: &XiConvergenceSpec, outcomes: &[Option<Vec<Vec<u64>>>]) -> Result<XiConvergenceReport> {
    let excluded = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let total = outcomes.len() as u64;
    if excluded * 100 > total {
        return Err(Error::ExcessiveExclusions {
            excluded: excluded as usize,
            total: total as usize,
        });
    }
    let used = total - excluded;

    let per_time = factorial(spec.agents).expect("small factorial") as usize;
    // hits[time][rank]: how often the permutation received weight 1/k, by k.
    let mut hits: Vec<Vec<BTreeMap<u64, u64>>> = vec![vec![BTreeMap::new(); per_time]; spec.times.len()];
    for snapshots in outcomes.iter().flatten() {
        for (ti, values) in snapshots.iter().enumerate() {
            let k = consistent_count(values)?;
            for_each_consistent(values, |p| *hits[ti][rank_of(p)].entry(k).or_insert(0) += 1);
        }
    }

    let z = z_for_confidence(spec.confidence);
    let n = used as f64;
    let mut estimates = Vec::with_capacity(spec.times.len() * per_time);
    for (ti, &t) in spec.times.iter().enumerate() {
        for (rank, by_denominator) in hits[ti].iter().enumerate() {
            let mut sum = BigRational::zero();
            let mut sum_sq = 0.0;
            for (&k, &c) in by_denominator {
                sum += BigRational::new(BigInt::from(c), BigInt::from(k));
                sum_sq += c as f64 / (k * k) as f64;
            }
            let exact = sum / BigRational::from_integer(BigInt::from(used.max(1)));
            let mean = exact.to_f64().unwrap_or(0.0);
            let var = if used > 1 {
                ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            let std_err = (var / n.max(1.0)).sqrt();
            estimates.push(XiEstimate {
                time: t,
                permutation: Permutation::unrank(spec.agents, rank)?.into(),
                mean,
                exact_mean: exact.to_string(),
                std_err,
                ci_low: mean - z * std_err,
                ci_high: mean + z * std_err,
            });
        }
    }

    Ok(XiConvergenceReport {
        agents: spec.agents,
        shifts: spec.shifts.clone(),
        replicates: total,
        excluded,
        confidence: spec.confidence,
        estimates,
    })
}
