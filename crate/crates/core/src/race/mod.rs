//! Event-driven simulation of `A` competing birth processes.
//!
//! Each agent's next jump time is the running sum of its waits; a binary
//! min-heap keyed on `(next jump time, agent index)` releases events in
//! time order, with ties going to the lower index.

mod dump;
mod engine;
mod trajectory;

pub use dump::{write_trajectory, DumpFormat, DumpVisitor, EventRecord};
pub use engine::{run_race, simulate_race, Horizon, RaceConfig, RaceSummary, RaceVisitor, DEFAULT_EVENT_CAP};
pub use trajectory::{jump_chain, ChainStep, JumpChain, RaceEvent, Trajectory};
