use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dispersion::{SumMode, DEFAULT_J_MAX, MIN_PETROV_SAMPLES};
use crate::error::{Error, Result};
use crate::increments::{FeedbackFunction, WaitingTimeModel};
use crate::race::DEFAULT_EVENT_CAP;
use crate::ranking::{TiePolicy, XiConvergenceSpec};
use crate::urn::MIN_COUPLING_REPLICATES;

/// A complete, reproducible description of one experiment. Together with
/// the master seed it determines every persisted byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub replicates: u64,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// Urn runs tracking which orderings of the bins occur.
    Coverage(CoverageParams),
    /// Races from zero; mean of `xi(π, v(t + s))` per permutation.
    XiConvergence(XiParams),
    /// Jump chain of exponential races against the exact urn law.
    Coupling(CouplingParams),
    /// Concentration of partial sums against `Σ D`.
    Petrov(PetrovParams),
    /// Divergence verdict for `Σ X_j^s`, optionally with urn leader fixation.
    Regime(RegimeParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Coverage(_) => "coverage",
            Experiment::XiConvergence(_) => "xi_convergence",
            Experiment::Coupling(_) => "coupling",
            Experiment::Petrov(_) => "petrov",
            Experiment::Regime(_) => "regime",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageParams {
    pub initial: Vec<u64>,
    pub feedback: FeedbackFunction,
    pub steps: u64,
    #[serde(default)]
    pub policy: TiePolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiParams {
    pub agents: usize,
    pub model: WaitingTimeModel,
    pub times: Vec<f64>,
    #[serde(default)]
    pub shifts: Vec<f64>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_event_cap")]
    pub event_cap: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub feedback: FeedbackFunction,
    pub initial: Vec<u64>,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PetrovParams {
    pub model: WaitingTimeModel,
    pub n_grid: Vec<u64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub samples: u64,
    #[serde(default)]
    pub mode: SumMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub feedback: FeedbackFunction,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_j_max")]
    pub j_max: u64,
    /// Initial urn counts for the fixation check; empty skips it.
    #[serde(default)]
    pub initial: Vec<u64>,
    /// Steps at which the leading bin is recorded.
    #[serde(default)]
    pub checkpoints: Vec<u64>,
}

fn default_confidence() -> f64 {
    0.95
}

fn default_event_cap() -> u64 {
    DEFAULT_EVENT_CAP
}

fn default_lambda() -> f64 {
    1.0
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0]
}

fn default_j_max() -> u64 {
    DEFAULT_J_MAX
}

impl XiParams {
    pub fn to_spec(&self, replicates: u64, master_seed: u64) -> XiConvergenceSpec {
        XiConvergenceSpec {
            agents: self.agents,
            model: self.model.clone(),
            times: self.times.clone(),
            shifts: self.shifts.clone(),
            replicates,
            master_seed,
            confidence: self.confidence,
            event_cap: self.event_cap,
        }
    }
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment, replicates: u64, master_seed: u64) -> Self {
        ExperimentSpec {
            experiment,
            replicates,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::argument("replicates must be >= 1"));
        }
        match &self.experiment {
            Experiment::Coverage(p) => {
                crate::urn::UrnState::new(p.initial.clone())?;
                crate::ranking::PermutationCoverage::new(p.initial.len(), p.policy)?;
            }
            Experiment::XiConvergence(p) => p.to_spec(self.replicates, self.master_seed).validate()?,
            Experiment::Coupling(p) => {
                if self.replicates < MIN_COUPLING_REPLICATES {
                    return Err(Error::argument(format!(
                        "coupling needs >= {MIN_COUPLING_REPLICATES} replicates"
                    )));
                }
                crate::urn::exact_sequence_distribution(&p.feedback, &p.initial, p.k)?;
            }
            Experiment::Petrov(p) => {
                if p.samples < MIN_PETROV_SAMPLES {
                    return Err(Error::argument(format!("petrov needs >= {MIN_PETROV_SAMPLES} samples")));
                }
            }
            Experiment::Regime(p) => {
                if p.lambdas.is_empty() {
                    return Err(Error::argument("regime needs at least one lambda"));
                }
                if !p.checkpoints.is_empty() {
                    crate::urn::UrnState::new(p.initial.clone())?;
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}
