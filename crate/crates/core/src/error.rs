use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// A selection or policy override left the Krasovskii set of some agent.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("no sliding selection at t = {t}: {reason}")]
    NoSlidingSelection { t: f64, reason: String },

    #[error("event limit of {limit} exceeded at t = {}", partial.end_time())]
    MaxEventsExceeded {
        limit: usize,
        partial: Box<Trajectory>,
    },

    #[error("regularized integration unstable at t = {t}; use a smaller step than h = {h}")]
    Unstable { t: f64, h: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
