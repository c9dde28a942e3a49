use serde::{Deserialize, Serialize};

use super::{AgentMode, Direction, NetworkState};
use crate::graphkit::GraphSchedule;
use crate::quantizer::{Position, QuantizerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Start,
    ThresholdHit,
    SurfaceDeparture,
    TopologySwitch,
    Equilibrium,
    Horizon,
    Stopped,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Start => "start",
            EventKind::ThresholdHit => "threshold-hit",
            EventKind::SurfaceDeparture => "surface-departure",
            EventKind::TopologySwitch => "topology-switch",
            EventKind::Equilibrium => "equilibrium",
            EventKind::Horizon => "horizon",
            EventKind::Stopped => "stopped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Departure {
    pub agent: usize,
    pub direction: Direction,
}

/// State at an event plus the selection and velocity used on the segment
/// that starts there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub t: f64,
    pub kinds: Vec<EventKind>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Convexification coefficient, `None` off the surfaces.
    pub alpha: Vec<Option<f64>>,
    pub velocity: Vec<f64>,
    /// Agents snapped onto a threshold at this event.
    #[serde(default)]
    pub hits: Vec<usize>,
    #[serde(default)]
    pub departures: Vec<Departure>,
    /// Index of the active schedule segment.
    #[serde(default)]
    pub segment: usize,
}

impl TrajectoryEvent {
    pub fn has(&self, kind: EventKind) -> bool {
        self.kinds.contains(&kind)
    }

    pub fn state(&self, quantizer: &QuantizerSpec) -> NetworkState {
        let mode = self
            .x
            .iter()
            .zip(&self.alpha)
            .map(|(&xi, a)| match (quantizer.position(xi), a) {
                (Position::Threshold(_), Some(alpha)) => AgentMode::OnSurface {
                    threshold: xi,
                    alpha: *alpha,
                },
                _ => AgentMode::Off,
            })
            .collect();
        NetworkState {
            t: self.t,
            x: self.x.clone(),
            mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Certified: the state never changes again.
    Equilibrium,
    Horizon,
    Stopped,
    /// Cut short, e.g. by the event limit.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub quantizer: QuantizerSpec,
    pub events: Vec<TrajectoryEvent>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t)
    }

    pub fn initial(&self) -> &TrajectoryEvent {
        &self.events[0]
    }

    pub fn last(&self) -> &TrajectoryEvent {
        self.events.last().expect("trajectory has at least one event")
    }

    pub fn is_certified(&self) -> bool {
        self.termination == Termination::Equilibrium
    }

    /// State at time `t` by affine interpolation inside the segment holding
    /// `t`. Past the last event the state is frozen.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let k = self.events.partition_point(|e| e.t <= t).saturating_sub(1);
        let e = &self.events[k];
        if k + 1 == self.events.len() && self.termination != Termination::Stopped {
            return e.x.clone();
        }
        let dt = t - e.t;
        e.x.iter().zip(&e.velocity).map(|(x, v)| x + v * dt).collect()
    }

    /// Checks the structural invariants of an emitted trajectory against the
    /// schedule it was produced with. Returns one message per violation.
    pub fn check_invariants(&self, schedule: &GraphSchedule, tol: f64) -> Vec<String> {
        let mut issues = Vec::new();
        let q = &self.quantizer;
        for (k, e) in self.events.iter().enumerate() {
            if k > 0 {
                let p = &self.events[k - 1];
                if !(e.t > p.t) {
                    issues.push(format!("event {k}: time {} not after {}", e.t, p.t));
                }
                let dt = e.t - p.t;
                for i in 0..self.n {
                    let predicted = p.x[i] + p.velocity[i] * dt;
                    if (predicted - e.x[i]).abs() > tol * (1.0 + e.x[i].abs()) {
                        issues.push(format!(
                            "event {k}: x_{} jumps from {predicted} to {}",
                            i + 1,
                            e.x[i]
                        ));
                    }
                }
            }
            let g = &schedule.segments()[e.segment].graph;
            for i in 0..self.n {
                let (lo, hi) = q.krasovskii_set(e.x[i]);
                if !(lo <= e.z[i] && e.z[i] <= hi) {
                    issues.push(format!(
                        "event {k}: z_{} = {} outside Kq = [{lo}, {hi}]",
                        i + 1,
                        e.z[i]
                    ));
                }
                let forced: f64 = g.out_edges(i).map(|(j, w)| w * (e.z[j] - e.z[i])).sum();
                let scale = tol * (1.0 + g.out_degree(i)) * (1.0 + e.z[i].abs());
                if (forced - e.velocity[i]).abs() > scale {
                    issues.push(format!(
                        "event {k}: velocity_{} = {} but -Lz gives {forced}",
                        i + 1,
                        e.velocity[i]
                    ));
                }
                if let Position::Threshold(_) = q.position(e.x[i]) {
                    let v = e.velocity[i];
                    let ok = if v > 0.0 {
                        e.z[i] == hi
                    } else if v < 0.0 {
                        e.z[i] == lo
                    } else {
                        true
                    };
                    if !ok {
                        issues.push(format!(
                            "event {k}: agent {} leaves its surface with z = {} (v = {v})",
                            i + 1,
                            e.z[i]
                        ));
                    }
                }
            }
        }
        issues
    }
}
