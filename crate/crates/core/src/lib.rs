//! Exact simulation and analysis of quantized consensus over time-varying
//! directed graphs, `x' ∈ -L(t) Kq(x)` with a Krasovskii-regularized
//! quantizer.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod graphkit;
pub mod io;
pub mod quantizer;
pub mod scenarios;

pub use analysis::{ConvergenceReport, LimitVerdict};
pub use dynamics::{
    simulate, AgentMode, Direction, EventKind, NetworkState, SelectionPolicy, Termination, Trajectory,
    TrajectoryEvent,
};
pub use error::{Error, Result};
pub use graphkit::{GraphSchedule, Segment, WeightedDigraph};
pub use quantizer::{LevelRange, Position, QuantizerSpec};
pub use scenarios::ScenarioConfig;
