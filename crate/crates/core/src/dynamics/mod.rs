//! Exact event-driven integration of `x' ∈ -L(t) Kq(x)`.
//!
//! Between events every velocity is constant, so the state is affine in time
//! and event times have closed forms. Agents that reach a threshold are
//! snapped onto the stored threshold value, which keeps "on a surface" a
//! discrete predicate.

mod engine;
mod regularized;
mod resolver;
mod trajectory;

pub use engine::{next_event, simulate, simulate_with, EventPlan, SimulationOptions};
pub use regularized::{max_deviation, simulate_regularized, RegularizedOptions, Sample};
pub use resolver::{
    resolve_sliding, selection_velocity, ResolveContext, ResolverOptions, Selection,
};
pub use trajectory::{Departure, EventKind, Termination, Trajectory, TrajectoryEvent};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AgentMode {
    Off,
    /// Sitting on `threshold`; the selected value is
    /// `lo * (1 - alpha) + hi * alpha` for the two adjacent levels.
    OnSurface { threshold: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub t: f64,
    pub x: Vec<f64>,
    pub mode: Vec<AgentMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaOverride {
    pub agent: usize,
    pub alpha: f64,
}

/// Rule picking one Krasovskii solution among the admissible ones.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Hold every surface agent whose hold is feasible.
    #[default]
    Sliding,
    /// Like `Sliding`, but where the hold system leaves freedom the choice
    /// keeps as few agents moving as possible, favouring a mover next to
    /// the agent that stopped most recently.
    SequentialSlow,
    /// Prescribed convexification coefficients for some agents (0-based),
    /// honoured while they give an admissible selection.
    FixedAlpha { alpha: Vec<AlphaOverride> },
}

impl SelectionPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionPolicy::Sliding => "sliding",
            SelectionPolicy::SequentialSlow => "sequential_slow",
            SelectionPolicy::FixedAlpha { .. } => "fixed_alpha",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let SelectionPolicy::FixedAlpha { alpha } = self {
            for o in alpha {
                if o.agent >= n {
                    return Err(Error::InvalidScenario(format!(
                        "alpha override for agent {} but n = {n}",
                        o.agent
                    )));
                }
                if !(0.0..=1.0).contains(&o.alpha) {
                    return Err(Error::ContractViolation(format!(
                        "alpha override {} for agent {} outside [0, 1]",
                        o.alpha, o.agent
                    )));
                }
            }
        }
        Ok(())
    }
}
