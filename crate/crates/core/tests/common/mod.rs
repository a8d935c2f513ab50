//! Random race configurations and an independent trajectory checker.

#![allow(dead_code)]

use birthrace_core::error::Error;
use birthrace_core::increments::{make_exponential_model, FeedbackFunction, TailRule, WaitingTimeModel};
use birthrace_core::race::{Horizon, RaceConfig, Trajectory};
use rand::Rng;

pub fn random_model<R: Rng + ?Sized>(rng: &mut R) -> WaitingTimeModel {
    match rng.random_range(0..5) {
        0 => make_exponential_model(FeedbackFunction::power(rng.random_range(0.0..1.5)).unwrap()),
        1 => make_exponential_model(FeedbackFunction::constant(rng.random_range(0.1..10.0)).unwrap()),
        2 => {
            let table = (0..rng.random_range(1..6))
                .map(|_| rng.random_range(0.5..5.0))
                .collect();
            let tail = if rng.random_bool(0.5) {
                TailRule::RepeatLast
            } else {
                TailRule::PowerExtrapolate
            };
            make_exponential_model(FeedbackFunction::tabulated(table, tail).unwrap())
        }
        3 => WaitingTimeModel::deterministic_plus_uniform(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0))
            .unwrap(),
        _ => {
            // Includes zero waits, so simultaneous jumps are exercised.
            let samples = (0..rng.random_range(1..5))
                .map(|_| rng.random_range(0..4) as f64 * 0.5)
                .collect();
            WaitingTimeModel::empirical(samples).unwrap()
        }
    }
}

pub fn random_config<R: Rng + ?Sized>(rng: &mut R) -> RaceConfig {
    let agents = rng.random_range(2..=5);
    let initial = (0..agents).map(|_| rng.random_range(0..5)).collect();
    let horizon = if rng.random_bool(0.5) {
        Horizon::Events(rng.random_range(0..400))
    } else {
        Horizon::Time(rng.random_range(0.0..20.0))
    };
    RaceConfig::new(initial, random_model(rng), horizon)
        .unwrap()
        .with_event_cap(2_000)
}

fn below(t: f64) -> f64 {
    if t > 0.0 {
        f64::from_bits(t.to_bits() - 1)
    } else {
        t
    }
}

/// Unit jumps, monotone times, event conservation, and agreement of hitting
/// times with `value_at`.
pub fn check_trajectory(traj: &Trajectory) -> Result<(), String> {
    let a = traj.num_agents();
    let init = traj.initial_values();
    let mut values = init.to_vec();
    let mut per_agent: Vec<Vec<f64>> = vec![Vec::new(); a];
    let mut last = 0.0f64;
    for (k, e) in traj.events().iter().enumerate() {
        if !(e.time >= last) {
            return Err(format!("event {k} at {} precedes {last}", e.time));
        }
        last = e.time;
        values[e.agent] += 1;
        if e.value != values[e.agent] {
            return Err(format!(
                "event {k}: agent {} jumped to {} from {}",
                e.agent,
                e.value,
                values[e.agent] - 1
            ));
        }
        per_agent[e.agent].push(e.time);
    }
    let final_values = traj.final_values();
    if final_values != values {
        return Err(format!("final values {final_values:?} != replayed {values:?}"));
    }
    let moved: u64 = final_values.iter().zip(init).map(|(f, i)| f - i).sum();
    if moved != traj.events().len() as u64 {
        return Err(format!("{} events but values moved by {moved}", traj.events().len()));
    }
    for agent in 0..a {
        if traj.jump_times(agent) != per_agent[agent].as_slice() {
            return Err(format!("agent {agent}: jump times disagree with the event log"));
        }
        for n in 0..=final_values[agent] {
            let tau = traj.hitting_time(agent, n).map_err(|e| e.to_string())?;
            if n <= init[agent] {
                if tau != 0.0 {
                    return Err(format!("agent {agent}: τ({n}) = {tau} for a starting value"));
                }
                continue;
            }
            if tau != per_agent[agent][(n - init[agent] - 1) as usize] {
                return Err(format!("agent {agent}: τ({n}) = {tau} is not its jump time"));
            }
            match traj.value_at(agent, tau) {
                Ok(v) if v < n => return Err(format!("agent {agent}: v(τ({n})) = {v} < {n}")),
                Ok(_) | Err(Error::OutOfRange { .. }) => {}
                Err(e) => return Err(e.to_string()),
            }
            match traj.value_at(agent, below(tau)) {
                Ok(v) if tau > 0.0 && v >= n => {
                    return Err(format!("agent {agent}: v just before τ({n}) = {tau} is already {v}"))
                }
                Ok(_) | Err(Error::OutOfRange { .. }) => {}
                Err(e) => return Err(e.to_string()),
            }
        }
        if traj.hitting_time(agent, final_values[agent] + 1).is_ok() {
            return Err(format!("agent {agent}: hitting time beyond the final value"));
        }
    }
    Ok(())
}
