use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One global event: `agent` moved up to `value` at `time`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceEvent {
    pub time: f64,
    pub agent: usize,
    pub value: u64,
}

/// A recorded race: per-agent jump times and the merged event log.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    initial_values: Vec<u64>,
    jump_times: Vec<Vec<f64>>,
    events: Vec<RaceEvent>,
    horizon: f64,
    pending_min: f64,
    exploded: bool,
}

/// The jump chain: value vectors at the successive global jump epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpChain {
    pub steps: Vec<ChainStep>,
    pub requested: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainStep {
    pub agent: usize,
    pub values: Vec<u64>,
}

impl JumpChain {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_truncated(&self) -> bool {
        self.steps.len() < self.requested
    }

    pub fn agents(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.agent)
    }
}

impl Trajectory {
    pub(crate) fn from_parts(
        initial_values: Vec<u64>,
        jump_times: Vec<Vec<f64>>,
        events: Vec<RaceEvent>,
        horizon: f64,
        pending_min: f64,
        exploded: bool,
    ) -> Self {
        Trajectory {
            initial_values,
            jump_times,
            events,
            horizon,
            pending_min,
            exploded,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.initial_values.len()
    }

    pub fn initial_values(&self) -> &[u64] {
        &self.initial_values
    }

    pub fn jump_times(&self, agent: usize) -> &[f64] {
        &self.jump_times[agent]
    }

    pub fn events(&self) -> &[RaceEvent] {
        &self.events
    }

    pub fn exploded(&self) -> bool {
        self.exploded
    }

    /// Last time at which the recorded state is complete.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn final_values(&self) -> Vec<u64> {
        self.initial_values
            .iter()
            .zip(&self.jump_times)
            .map(|(v, jumps)| v + jumps.len() as u64)
            .collect()
    }

    fn check_agent(&self, agent: usize) -> Result<()> {
        if agent < self.num_agents() {
            Ok(())
        } else {
            Err(Error::argument(format!(
                "agent {agent} out of range for {} agents",
                self.num_agents()
            )))
        }
    }

    /// `v_a(t)`: initial value plus the number of jumps at times `<= t`.
    pub fn value_at(&self, agent: usize, t: f64) -> Result<u64> {
        self.check_agent(agent)?;
        if !(t >= 0.0) {
            return Err(Error::argument(format!("time {t} must be >= 0")));
        }
        if t > self.horizon || t >= self.pending_min {
            return Err(Error::OutOfRange {
                requested: t,
                horizon: self.horizon,
            });
        }
        let jumps = &self.jump_times[agent];
        Ok(self.initial_values[agent] + jumps.partition_point(|&x| x <= t) as u64)
    }

    /// All agents' values at `t`.
    pub fn values_at(&self, t: f64) -> Result<Vec<u64>> {
        (0..self.num_agents()).map(|a| self.value_at(a, t)).collect()
    }

    /// `τ_a(n)`: the time agent `a` reaches value `n`; zero when it starts at
    /// or above `n`.
    pub fn hitting_time(&self, agent: usize, n: u64) -> Result<f64> {
        self.check_agent(agent)?;
        let start = self.initial_values[agent];
        if n <= start {
            return Ok(0.0);
        }
        let jumps = &self.jump_times[agent];
        let idx = (n - start - 1) as usize;
        jumps.get(idx).copied().ok_or(Error::NotYetReached {
            agent,
            requested: n,
            highest: start + jumps.len() as u64,
        })
    }

    /// The first `steps` entries of the jump chain. Fewer are returned when
    /// the trajectory holds fewer events.
    pub fn jump_chain(&self, steps: usize) -> JumpChain {
        let mut values = self.initial_values.clone();
        let steps_out = self
            .events
            .iter()
            .take(steps)
            .map(|e| {
                values[e.agent] += 1;
                ChainStep {
                    agent: e.agent,
                    values: values.clone(),
                }
            })
            .collect();
        JumpChain {
            steps: steps_out,
            requested: steps,
        }
    }
}

/// Free-function form of [`Trajectory::jump_chain`].
pub fn jump_chain(traj: &Trajectory, steps: usize) -> JumpChain {
    traj.jump_chain(steps)
}
