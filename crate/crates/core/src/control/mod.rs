//! Animation state machines described in a small controller language.
//!
//! A program declares states (each playing one clip), an initial state,
//! and transitions fired by key presses, timers or seeded random checks:
//!
//! ```text
//! state idle plays "Idle" loop
//! state walk plays "Walking" loop
//! initial idle
//! on key(space) from idle goto walk fade 0.25
//! on timer(3) in walk goto idle fade 0.5
//! on random(0.2, 0.5) from ANY goto idle fade 0.3
//! ```
//!
//! `in <state>` is a synonym for `from <state>`. Lines starting with `#` are
//! comments. Programs are data: nothing in them is executed as code.

mod generate;
mod parse;
mod rng;
mod sim;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numfmt::fixed6;

pub use generate::{generate_controller, ControlGenError, ControllerResult};
pub use parse::parse_controller;
pub use rng::SplitMix64;
pub use sim::{simulate, KeyInput, SimEvent, SimTrace, TraceEntry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("state {0:?} declared twice")]
    DuplicateState(String),
    #[error("no initial state declared")]
    NoInitialState,
    #[error("more than one initial state declared (line {0})")]
    MultipleInitialStates(usize),
}

impl ControlError {
    pub fn code(&self) -> &'static str {
        match self {
            ControlError::Syntax { .. } => "SyntaxError",
            ControlError::UnknownState(_) => "UnknownState",
            ControlError::DuplicateState(_) => "DuplicateState",
            ControlError::NoInitialState => "NoInitialState",
            ControlError::MultipleInitialStates(_) => "MultipleInitialStates",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDecl {
    pub name: String,
    pub clip: String,
    #[serde(rename = "loop")]
    pub looping: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Any,
    State(String),
}

impl Source {
    pub fn matches(&self, state: &str) -> bool {
        match self {
            Source::Any => true,
            Source::State(s) => s == state,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    Key { name: String },
    /// Fires once, `seconds` after the state was entered.
    Timer { seconds: f64 },
    /// Checked every `interval` seconds after entry; fires with `probability`.
    Random { probability: f64, interval: f64 },
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::Key { name } => write!(f, "key({name})"),
            Trigger::Timer { seconds } => write!(f, "timer({})", fixed6(*seconds)),
            Trigger::Random { probability, interval } => {
                write!(f, "random({}, {})", fixed6(*probability), fixed6(*interval))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: Source,
    pub to: String,
    pub trigger: Trigger,
    pub fade: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerProgram {
    pub states: Vec<StateDecl>,
    pub initial_state: String,
    pub transitions: Vec<Transition>,
}

impl ControllerProgram {
    pub fn state(&self, name: &str) -> Option<&StateDecl> {
        self.states.iter().find(|s| s.name == name)
    }

    /// Clip names referenced by the states, in declaration order.
    pub fn clips(&self) -> Vec<&str> {
        self.states.iter().map(|s| s.clip.as_str()).collect()
    }

    /// Canonical program text.
    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        for s in &self.states {
            out.push_str(&format!("state {} plays \"{}\"{}\n", s.name, s.clip, if s.looping { " loop" } else { "" }));
        }
        out.push_str(&format!("initial {}\n", self.initial_state));
        for t in &self.transitions {
            let from = match &t.from {
                Source::Any => "ANY",
                Source::State(s) => s,
            };
            out.push_str(&format!("on {} from {} goto {} fade {}\n", t.trigger, from, t.to, fixed6(t.fade)));
        }
        out
    }
}
