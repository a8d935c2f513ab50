//! Replicated experiments with per-replicate random streams, summaries, and
//! JSON-lines persistence.
//!
//! Replicate `i` draws from stream `i` of the master seed, so results do not
//! depend on how replicates are scheduled across worker threads.

mod persist;
mod spec;
mod summary;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{petrov_probe, three_series_classifier, DispersionReport, PetrovTable};
use crate::error::{Error, Result};
use crate::increments::make_exponential_model;
use crate::ranking::{
    summarize_xi, xi_race_config, xi_replicate, CoverageReport, PermutationCoverage, Stamp, XiConvergenceReport,
};
use crate::rng::{derive_seed, stream};
use crate::urn::{exact_sequence_distribution, sample_chain_sequence, BinSelector, CouplingReport, UrnState};

pub use persist::{
    load_results, persist_results, read_results, write_csv, write_results, ResultHeader, ARTIFACT_VERSION,
    SCHEMA_VERSION,
};
pub use spec::{CouplingParams, CoverageParams, Experiment, ExperimentSpec, PetrovParams, RegimeParams, XiParams};
pub use summary::{wilson_interval, Proportion, SummaryStats, EXCLUSION_LIMIT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplicateRecord {
    Coverage {
        replicate: u64,
        /// First step at which each permutation was seen, by lexicographic rank.
        first_hits: Vec<Option<u64>>,
    },
    XiConvergence {
        replicate: u64,
        /// `v_a(t + s_a)` per observation time; absent when the race exploded.
        values: Option<Vec<Vec<u64>>>,
    },
    Coupling {
        replicate: u64,
        /// Index of the jumper sequence, first jumper most significant in base `A`.
        sequence: usize,
    },
    Petrov {
        replicate: u64,
        table: PetrovTable,
    },
    Regime {
        replicate: u64,
        /// Leading bin at each checkpoint.
        leaders: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Coverage {
        merged: CoverageReport,
        permutations_seen: SummaryStats,
        complete: Proportion,
    },
    XiConvergence(XiConvergenceReport),
    Coupling(CouplingReport),
    Petrov {
        /// Per replicate: largest over smallest product along the grid.
        spreads: Vec<Option<f64>>,
    },
    Regime {
        classifications: Vec<DispersionReport>,
        /// Replicates whose leader was the same at every checkpoint.
        fixation: Option<Proportion>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultSet {
    pub header: ResultHeader,
    pub records: Vec<ReplicateRecord>,
    pub summary: Option<Summary>,
}

/// Run every replicate and summarize. `workers` sets the size of a
/// dedicated thread pool; `None` uses the global pool.
pub fn run_experiment(spec: &ExperimentSpec, workers: Option<usize>) -> Result<ResultSet> {
    spec.validate()?;
    match workers {
        Some(0) => Err(Error::argument("workers must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::argument(format!("thread pool: {e}")))?
            .install(|| run_in_pool(spec)),
        None => run_in_pool(spec),
    }
}

fn run_in_pool(spec: &ExperimentSpec) -> Result<ResultSet> {
    let records = run_replicates(spec)?;
    let summary = summarize(spec, &records)?;
    Ok(ResultSet {
        header: ResultHeader::for_spec(spec)?,
        records,
        summary: Some(summary),
    })
}

fn par_replicates<F>(count: u64, f: F) -> Result<Vec<ReplicateRecord>>
where
    F: Fn(u64) -> Result<ReplicateRecord> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

fn run_replicates(spec: &ExperimentSpec) -> Result<Vec<ReplicateRecord>> {
    let n = spec.replicates;
    let seed = spec.master_seed;
    match &spec.experiment {
        Experiment::Coverage(p) => par_replicates(n, |i| {
            let tracker = coverage_replicate(p, &mut stream(seed, i))?;
            Ok(ReplicateRecord::Coverage {
                replicate: i,
                first_hits: tracker
                    .first_hits()
                    .iter()
                    .map(|h| match h {
                        Some(Stamp::Step(s)) => Some(*s),
                        _ => None,
                    })
                    .collect(),
            })
        }),
        Experiment::XiConvergence(p) => {
            let xi = p.to_spec(n, seed);
            let config = xi_race_config(&xi)?;
            par_replicates(n, |i| {
                Ok(ReplicateRecord::XiConvergence {
                    replicate: i,
                    values: xi_replicate(&xi, &config, i)?,
                })
            })
        }
        Experiment::Coupling(p) => {
            let model = make_exponential_model(p.feedback.clone());
            par_replicates(n, |i| {
                Ok(ReplicateRecord::Coupling {
                    replicate: i,
                    sequence: sample_chain_sequence(&model, &p.initial, p.k, &mut stream(seed, i))?,
                })
            })
        }
        // Each probe already spreads its sample copies over the pool.
        Experiment::Petrov(p) => (0..n)
            .map(|i| {
                let table = petrov_probe(&p.model, &p.n_grid, p.lambda, p.samples, p.mode, derive_seed(seed, i))?;
                Ok(ReplicateRecord::Petrov { replicate: i, table })
            })
            .collect(),
        Experiment::Regime(p) if p.checkpoints.is_empty() => Ok(Vec::new()),
        Experiment::Regime(p) => par_replicates(n, |i| {
            Ok(ReplicateRecord::Regime {
                replicate: i,
                leaders: leader_path(p, &mut stream(seed, i))?,
            })
        }),
    }
}

/// One urn run; observation starts after the first step, since the initial
/// counts are chosen rather than produced by the process.
pub fn coverage_replicate<R: rand::Rng + ?Sized>(p: &CoverageParams, rng: &mut R) -> Result<PermutationCoverage> {
    let mut tracker = PermutationCoverage::new(p.initial.len(), p.policy)?;
    let mut state = UrnState::new(p.initial.clone())?;
    let mut selector = BinSelector::new(p.feedback.clone());
    for _ in 0..p.steps {
        state.advance(&mut selector, rng)?;
        tracker.update(state.counts(), Stamp::Step(state.step()))?;
        if tracker.is_complete() {
            break;
        }
    }
    Ok(tracker)
}

/// Leading bin at each checkpoint of one urn run.
pub fn leader_path<R: rand::Rng + ?Sized>(p: &RegimeParams, rng: &mut R) -> Result<Vec<usize>> {
    let mut checkpoints = p.checkpoints.clone();
    checkpoints.sort_unstable();
    let mut state = UrnState::new(p.initial.clone())?;
    let mut selector = BinSelector::new(p.feedback.clone());
    let mut leaders = Vec::with_capacity(checkpoints.len());
    for c in checkpoints {
        while state.step() < c {
            state.advance(&mut selector, rng)?;
        }
        leaders.push(state.leader());
    }
    Ok(leaders)
}

fn summarize(spec: &ExperimentSpec, records: &[ReplicateRecord]) -> Result<Summary> {
    const CONFIDENCE: f64 = 0.95;
    match &spec.experiment {
        Experiment::Coverage(p) => {
            let mut merged = PermutationCoverage::new(p.initial.len(), p.policy)?;
            let mut seen = Vec::with_capacity(records.len());
            let mut complete = 0;
            for r in records {
                if let ReplicateRecord::Coverage { first_hits, .. } = r {
                    let stamps = first_hits.iter().map(|h| h.map(Stamp::Step)).collect();
                    let t = PermutationCoverage::from_first_hits(p.initial.len(), p.policy, stamps)?;
                    seen.push(t.bits_set() as f64);
                    complete += t.is_complete() as u64;
                    merged.merge(&t)?;
                }
            }
            Ok(Summary::Coverage {
                merged: merged.report(),
                permutations_seen: SummaryStats::from_values("permutations_seen", &seen, 0, CONFIDENCE),
                complete: Proportion::new(complete, records.len() as u64, CONFIDENCE)?,
            })
        }
        Experiment::XiConvergence(p) => {
            let outcomes: Vec<Option<Vec<Vec<u64>>>> = records
                .iter()
                .filter_map(|r| match r {
                    ReplicateRecord::XiConvergence { values, .. } => Some(values.clone()),
                    _ => None,
                })
                .collect();
            Ok(Summary::XiConvergence(summarize_xi(
                &p.to_spec(spec.replicates, spec.master_seed),
                &outcomes,
            )?))
        }
        Experiment::Coupling(p) => {
            let exact = exact_sequence_distribution(&p.feedback, &p.initial, p.k)?;
            let mut observed = vec![0u64; exact.probabilities.len()];
            for r in records {
                if let ReplicateRecord::Coupling { sequence, .. } = r {
                    observed[*sequence] += 1;
                }
            }
            Ok(Summary::Coupling(CouplingReport::from_counts(&exact, &observed)?))
        }
        Experiment::Petrov(_) => Ok(Summary::Petrov {
            spreads: records
                .iter()
                .filter_map(|r| match r {
                    ReplicateRecord::Petrov { table, .. } => Some(table.spread()),
                    _ => None,
                })
                .collect(),
        }),
        Experiment::Regime(p) => {
            let model = make_exponential_model(p.feedback.clone());
            let classifications = p
                .lambdas
                .iter()
                .map(|&l| three_series_classifier(&model, l, p.j_max))
                .collect::<Result<_>>()?;
            let fixation = if p.checkpoints.is_empty() {
                None
            } else {
                let fixed = records
                    .iter()
                    .filter(|r| matches!(r, ReplicateRecord::Regime { leaders, .. } if leaders.windows(2).all(|w| w[0] == w[1])))
                    .count() as u64;
                Some(Proportion::new(fixed, records.len() as u64, CONFIDENCE)?)
            };
            Ok(Summary::Regime {
                classifications,
                fixation,
            })
        }
    }
}

/// Why [`run_experiment_to`] failed. A persistence failure keeps the
/// computed results.
#[derive(Debug)]
pub enum RunError {
    Compute(Error),
    Persist { results: Box<ResultSet>, error: Error },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Compute(e) => write!(f, "{e}"),
            RunError::Persist { error, .. } => write!(f, "results computed but not saved: {error}"),
        }
    }
}

impl std::error::Error for RunError {}

pub fn run_experiment_to(
    spec: &ExperimentSpec,
    workers: Option<usize>,
    path: &std::path::Path,
) -> std::result::Result<ResultSet, RunError> {
    let results = run_experiment(spec, workers).map_err(RunError::Compute)?;
    match persist_results(&results, path) {
        Ok(()) => Ok(results),
        Err(error) => Err(RunError::Persist {
            results: Box::new(results),
            error,
        }),
    }
}
