//! Discrete-event simulation of a controller program.
//!
//! Starts in the initial state at t = 0. At equal times, key inputs are
//! handled before timers and random checks, and among transitions the one
//! declared first wins. A transition records `crossfade_started` and the
//! state switches immediately (`entered` at the same time). Every entry
//! restarts the timers and random-check schedules of the new state.
//! Random checks draw one [`SplitMix64`] double each and fire when it is
//! below the probability.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ControllerProgram, SplitMix64, Trigger};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInput {
    pub time: f64,
    pub key: String,
}

impl KeyInput {
    pub fn new(time: f64, key: impl Into<String>) -> Self {
        Self { time, key: key.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    Entered { state: String },
    CrossfadeStarted { from: String, to: String, fade: f64 },
    Input { key: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub time: f64,
    #[serde(flatten)]
    pub event: SimEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub horizon: f64,
    pub events: Vec<TraceEntry>,
}

impl SimTrace {
    /// Pretty JSON; byte-identical for identical simulations.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes") + "\n"
    }

    /// States in the order they were entered, with entry times.
    pub fn entries(&self) -> Vec<(f64, &str)> {
        self.events
            .iter()
            .filter_map(|e| match &e.event {
                SimEvent::Entered { state } => Some((e.time, state.as_str())),
                _ => None,
            })
            .collect()
    }

    /// Fraction of `[0, horizon]` spent in each state.
    pub fn occupancy(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        if self.horizon <= 0.0 {
            return out;
        }
        let entries = self.entries();
        for (i, (t, state)) in entries.iter().enumerate() {
            let end = entries.get(i + 1).map_or(self.horizon, |(next, _)| *next);
            *out.entry(state.to_string()).or_insert(0.0) += (end - t) / self.horizon;
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    transition: usize,
    time: f64,
    /// Number of random checks already made since entry.
    checks: u64,
}

struct Machine<'a> {
    program: &'a ControllerProgram,
    current: String,
    entry: f64,
    schedule: Vec<Scheduled>,
    events: Vec<TraceEntry>,
}

impl<'a> Machine<'a> {
    fn enter(&mut self, state: String, time: f64) {
        self.events.push(TraceEntry { time, event: SimEvent::Entered { state: state.clone() } });
        self.current = state;
        self.entry = time;
        self.schedule = self
            .program
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.from.matches(&self.current))
            .filter_map(|(i, t)| match t.trigger {
                Trigger::Timer { seconds } => Some(Scheduled { transition: i, time: time + seconds, checks: 0 }),
                Trigger::Random { interval, .. } => Some(Scheduled { transition: i, time: time + interval, checks: 1 }),
                Trigger::Key { .. } => None,
            })
            .collect();
    }

    fn fire(&mut self, transition: usize, time: f64) {
        let t = &self.program.transitions[transition];
        self.events.push(TraceEntry {
            time,
            event: SimEvent::CrossfadeStarted { from: self.current.clone(), to: t.to.clone(), fade: t.fade },
        });
        self.enter(t.to.clone(), time);
    }

    /// Earliest pending timer or random check; ties go to the earlier
    /// declared transition.
    fn next_scheduled(&self) -> Option<usize> {
        (0..self.schedule.len()).min_by(|&a, &b| {
            let (sa, sb) = (self.schedule[a], self.schedule[b]);
            sa.time.total_cmp(&sb.time).then(sa.transition.cmp(&sb.transition))
        })
    }
}

/// Runs `program` over `[0, horizon]`. Inputs are taken in time order;
/// inputs outside `[0, horizon]` are dropped. Inputs that match no
/// transition are still recorded.
pub fn simulate(program: &ControllerProgram, inputs: &[KeyInput], horizon: f64, rng_seed: u64) -> SimTrace {
    let mut inputs: Vec<&KeyInput> = inputs
        .iter()
        .filter(|i| i.time.is_finite() && i.time >= 0.0 && i.time <= horizon)
        .collect();
    inputs.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut rng = SplitMix64::new(rng_seed);
    let mut m = Machine { program, current: String::new(), entry: 0.0, schedule: Vec::new(), events: Vec::new() };
    m.enter(program.initial_state.clone(), 0.0);

    let mut next_input = 0;
    loop {
        let input_time = inputs.get(next_input).map(|i| i.time);
        let sched = m.next_scheduled();
        let sched_time = sched.map(|i| m.schedule[i].time);

        let take_input = match (input_time, sched_time) {
            (Some(a), Some(b)) => a <= b,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };

        if take_input {
            let input = inputs[next_input];
            next_input += 1;
            m.events.push(TraceEntry { time: input.time, event: SimEvent::Input { key: input.key.clone() } });
            let matched = program.transitions.iter().position(|t| {
                t.from.matches(&m.current) && matches!(&t.trigger, Trigger::Key { name } if *name == input.key)
            });
            if let Some(i) = matched {
                m.fire(i, input.time);
            }
            continue;
        }

        let slot = sched.expect("scheduled event");
        let Scheduled { transition, time, checks } = m.schedule[slot];
        if time > horizon {
            break;
        }
        match program.transitions[transition].trigger {
            Trigger::Timer { .. } => m.fire(transition, time),
            Trigger::Random { probability, interval } => {
                if rng.next_f64() < probability {
                    m.fire(transition, time);
                } else {
                    let checks = checks + 1;
                    m.schedule[slot] = Scheduled { transition, time: m.entry + checks as f64 * interval, checks };
                }
            }
            Trigger::Key { .. } => unreachable!("key triggers are never scheduled"),
        }
    }

    SimTrace { horizon, events: m.events }
}
