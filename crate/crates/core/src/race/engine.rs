use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trajectory::{RaceEvent, Trajectory};
use crate::error::{Error, Result};
use crate::increments::WaitingTimeModel;

/// Default per-agent event cap; exceeding it before the horizon marks the
/// run as exploded.
pub const DEFAULT_EVENT_CAP: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    /// Run until every pending jump lies after `t_max`.
    Time(f64),
    /// Run for exactly this many global events.
    Events(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceConfig {
    pub initial_values: Vec<u64>,
    pub model: WaitingTimeModel,
    pub horizon: Horizon,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_event_cap")]
    pub event_cap: u64,
}

fn default_event_cap() -> u64 {
    DEFAULT_EVENT_CAP
}

impl RaceConfig {
    pub fn new(initial_values: Vec<u64>, model: WaitingTimeModel, horizon: Horizon) -> Result<Self> {
        let cfg = RaceConfig {
            initial_values,
            model,
            horizon,
            seed: 0,
            event_cap: DEFAULT_EVENT_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `num_agents` agents all starting from zero.
    pub fn from_zero(num_agents: usize, model: WaitingTimeModel, horizon: Horizon) -> Result<Self> {
        Self::new(vec![0; num_agents], model, horizon)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        self.event_cap = cap;
        self
    }

    pub fn num_agents(&self) -> usize {
        self.initial_values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_values.len() < 2 {
            return Err(Error::argument(format!(
                "a race needs at least 2 agents, got {}",
                self.initial_values.len()
            )));
        }
        match self.horizon {
            Horizon::Time(t) if !(t.is_finite() && t >= 0.0) => {
                Err(Error::argument(format!("time horizon {t} must be finite and >= 0")))
            }
            _ if self.event_cap == 0 => Err(Error::argument("event cap must be positive")),
            _ => Ok(()),
        }
    }
}

/// Receives every global event as it happens.
pub trait RaceVisitor {
    fn on_event(&mut self, event: &RaceEvent, values: &[u64]);
}

impl<F: FnMut(&RaceEvent, &[u64])> RaceVisitor for F {
    fn on_event(&mut self, event: &RaceEvent, values: &[u64]) {
        self(event, values)
    }
}

/// What a streamed run leaves behind when no event log is kept.
#[derive(Clone, Debug, PartialEq)]
pub struct RaceSummary {
    pub final_values: Vec<u64>,
    pub events: u64,
    /// Time of the last recorded event (or `t_max` for time horizons).
    pub horizon: f64,
    /// Earliest pending (unrealized) jump; the state is exact on `[0, pending_min)`.
    pub pending_min: f64,
    pub exploded: bool,
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    time: f64,
    agent: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // Reversed: BinaryHeap is a max-heap, we want the earliest (time, agent).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.agent.cmp(&self.agent))
    }
}

/// Neumaier-compensated running sum of one agent's waits.
#[derive(Clone, Copy, Debug, Default)]
struct Clock {
    sum: f64,
    comp: f64,
}

impl Clock {
    #[inline]
    fn add(&mut self, x: f64) -> f64 {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.sum + self.comp
    }
}

/// Simulate the race, streaming events to `visitor` without keeping a log.
pub fn run_race<R, V>(config: &RaceConfig, rng: &mut R, visitor: &mut V) -> Result<RaceSummary>
where
    R: Rng + ?Sized,
    V: RaceVisitor + ?Sized,
{
    config.validate()?;
    let n = config.num_agents();
    let mut sampler = config.model.sampler();
    let mut values = config.initial_values.clone();
    let mut counts = vec![0u64; n];
    let mut clocks = vec![Clock::default(); n];
    let mut heap = BinaryHeap::with_capacity(n);
    for a in 0..n {
        let wait = sampler.sample(values[a] + 1, rng)?;
        heap.push(Pending {
            time: clocks[a].add(wait),
            agent: a,
        });
    }

    let mut events = 0u64;
    let mut last_time = 0.0;
    let mut exploded = false;
    while let Some(&next) = heap.peek() {
        match config.horizon {
            Horizon::Time(t_max) if next.time > t_max => break,
            Horizon::Events(n_max) if events >= n_max => break,
            _ => {}
        }
        let a = next.agent;
        if counts[a] >= config.event_cap {
            exploded = true;
            break;
        }
        heap.pop();
        values[a] += 1;
        counts[a] += 1;
        events += 1;
        last_time = next.time;
        visitor.on_event(
            &RaceEvent {
                time: next.time,
                agent: a,
                value: values[a],
            },
            &values,
        );
        let wait = sampler.sample(values[a] + 1, rng)?;
        heap.push(Pending {
            time: clocks[a].add(wait),
            agent: a,
        });
    }

    let pending_min = heap.peek().map_or(f64::INFINITY, |p| p.time);
    let horizon = match config.horizon {
        Horizon::Time(t_max) if !exploded => t_max,
        _ => last_time,
    };
    Ok(RaceSummary {
        final_values: values,
        events,
        horizon,
        pending_min,
        exploded,
    })
}

/// Simulate the race and keep the full event log.
pub fn simulate_race<R: Rng + ?Sized>(config: &RaceConfig, rng: &mut R) -> Result<Trajectory> {
    let n = config.num_agents();
    let mut jump_times: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut log = Vec::new();
    let summary = run_race(config, rng, &mut |e: &RaceEvent, _: &[u64]| {
        jump_times[e.agent].push(e.time);
        log.push(*e);
    })?;
    Ok(Trajectory::from_parts(
        config.initial_values.clone(),
        jump_times,
        log,
        summary.horizon,
        summary.pending_min,
        summary.exploded,
    ))
}
