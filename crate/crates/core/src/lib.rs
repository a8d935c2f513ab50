//! Competing birth processes and balls-in-bins processes with feedback.
//!
//! `A` agents each climb `0, 1, 2, ...` after independent waits `X_j`. With
//! exponential waits of rate `f(j - 1)` the sequence of value vectors is a
//! balls-in-bins process in which a bin holding `m` balls is chosen with
//! probability proportional to `f(m)`. This crate simulates both, tracks
//! which rankings of the agents have been observed, and provides the
//! concentration and dispersion tools used to check the non-fixation regime.

pub mod dispersion;
pub mod error;
pub mod increments;
pub mod montecarlo;
mod quadrature;
pub mod race;
pub mod ranking;
pub mod rng;
pub mod stats;
pub mod urn;

pub use error::{Error, Result};
