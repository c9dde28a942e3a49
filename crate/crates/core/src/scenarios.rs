//! Scenario configuration, the reference builders and a seeded random
//! generator for test corpora.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AlphaOverride, SelectionPolicy};
use crate::error::{Error, Result};
use crate::graphkit::{GraphSchedule, Segment, WeightedDigraph};
use crate::quantizer::QuantizerSpec;

pub const DEFAULT_MAX_EVENTS: usize = 100_000;
pub const DEFAULT_HORIZON: f64 = 1e6;

fn default_max_events() -> usize {
    DEFAULT_MAX_EVENTS
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

/// Expected outcomes attached to reference scenarios.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_con: Option<f64>,
    /// Lower bound the measured convergence time must respect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_con_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_infinity: Option<f64>,
    /// Velocity of agent 1 during the first segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_speed: Option<f64>,
    /// All agents end at the same point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collocation: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub schedule: GraphSchedule,
    pub quantizer: QuantizerSpec,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub policy: SelectionPolicy,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_max_events")]
    pub max_events: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

impl ScenarioConfig {
    pub fn new(schedule: GraphSchedule, quantizer: QuantizerSpec, x0: Vec<f64>) -> Result<Self> {
        let c = ScenarioConfig {
            name: None,
            schedule,
            quantizer,
            x0,
            policy: SelectionPolicy::Sliding,
            horizon: DEFAULT_HORIZON,
            max_events: DEFAULT_MAX_EVENTS,
            expected: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.schedule.n()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.schedule.n();
        if self.x0.len() != n {
            return Err(Error::InvalidScenario(format!(
                "x0 has length {}, schedule has {n} agents",
                self.x0.len()
            )));
        }
        if let Some(v) = self.x0.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidScenario(format!("non-finite initial state {v}")));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if self.max_events == 0 {
            return Err(Error::InvalidScenario("max_events must be at least 1".into()));
        }
        self.policy.validate(n)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: ScenarioConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn with_policy(mut self, policy: SelectionPolicy) -> Result<Self> {
        policy.validate(self.n())?;
        self.policy = policy;
        Ok(self)
    }
}

fn line_graph(n: usize) -> Result<WeightedDigraph> {
    let edges = (0..n.saturating_sub(1)).flat_map(|i| [(i, i + 1, 1.0), (i + 1, i, 1.0)]);
    WeightedDigraph::from_edges(n, edges)
}

/// Symmetric unit-weight line with `x0_i = delta (i - 1)`, run under
/// `SequentialSlow`.
pub fn line_ramp(n: usize, delta: f64) -> Result<ScenarioConfig> {
    if n < 3 {
        return Err(Error::InvalidScenario(format!("line ramp needs n >= 3, got {n}")));
    }
    let quantizer = QuantizerSpec::uniform(delta)?;
    let schedule = GraphSchedule::constant(line_graph(n)?, 1.0, 1.0)?;
    let x0: Vec<f64> = (0..n).map(|i| delta * i as f64).collect();
    let spread = quantizer.quantize(x0[n - 1])? - quantizer.quantize(x0[0])?;
    Ok(ScenarioConfig {
        name: Some(format!("line_ramp_n{n}")),
        schedule,
        quantizer,
        x0,
        policy: SelectionPolicy::SequentialSlow,
        horizon: DEFAULT_HORIZON,
        max_events: DEFAULT_MAX_EVENTS,
        expected: Some(Expected {
            // Only forced when the agents must collocate (even n).
            t_con_lower: (n % 2 == 0).then(|| n as f64 * spread / (8.0 * delta)),
            // The average delta (n - 1) / 2 is a half-level exactly when n is even.
            q_infinity: (n % 2 == 1).then(|| delta * ((n - 1) / 2) as f64),
            collocation: Some(n % 2 == 0),
            ..Default::default()
        }),
    })
}

/// Agent `i` listens to `i + 1` with weight `a`, agents `2..n-1` also listen
/// to agent 1 with weight `b`; agent `n` listens to nobody. Starts at
/// `(0, 1/2, ..., 1/2, 1)` with `Delta = 1` and the prescribed sliding
/// coefficients `alpha_i = (a / (a + b))^(n - i)`.
pub fn slow_chain(n: usize, a: f64, b: f64) -> Result<ScenarioConfig> {
    if n < 3 {
        return Err(Error::InvalidScenario(format!("slow chain needs n >= 3, got {n}")));
    }
    if !(a > 0.0 && a.is_finite() && b.is_finite() && b >= a) {
        return Err(Error::InvalidScenario(format!("need 0 < a <= b, got a = {a}, b = {b}")));
    }
    let mut edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, a)).collect();
    edges.extend((1..n - 1).map(|i| (i, 0, b)));
    let schedule = GraphSchedule::constant(WeightedDigraph::from_edges(n, edges)?, a, b)?;
    let mut x0 = vec![0.5; n];
    x0[0] = 0.0;
    x0[n - 1] = 1.0;
    let r = a / (a + b);
    let alpha = (1..n - 1)
        .map(|i| AlphaOverride {
            agent: i,
            alpha: r.powi((n - 1 - i) as i32),
        })
        .collect();
    let t_con = 0.5 / a * ((a + b) / a).powi(n as i32 - 2);
    Ok(ScenarioConfig {
        name: Some(format!("slow_chain_n{n}")),
        schedule,
        quantizer: QuantizerSpec::uniform(1.0)?,
        x0,
        policy: SelectionPolicy::FixedAlpha { alpha },
        horizon: DEFAULT_HORIZON.max(10.0 * t_con),
        max_events: DEFAULT_MAX_EVENTS,
        expected: Some(Expected {
            t_con: Some(t_con),
            leader_speed: Some(a * r.powi(n as i32 - 2)),
            q_infinity: Some(1.0),
            ..Default::default()
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switching {
    pub graphs: usize,
    pub dwell: f64,
    /// Draw a fresh topology per graph; otherwise only weights change.
    pub vary_topology: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomScenarioParams {
    pub n: usize,
    pub seed: u64,
    /// Probability of each extra directed edge beyond the planted tree.
    pub edge_density: f64,
    pub weight_range: (f64, f64),
    pub a_low: f64,
    pub a_high: f64,
    pub delta: f64,
    /// Initial states are drawn from `[0, x0_spread]`.
    pub x0_spread: f64,
    /// Add every edge in both directions with equal weight.
    pub symmetric: bool,
    pub switching: Option<Switching>,
    pub policy: SelectionPolicy,
    pub horizon: f64,
}

impl Default for RandomScenarioParams {
    fn default() -> Self {
        RandomScenarioParams {
            n: 5,
            seed: 0,
            edge_density: 0.3,
            weight_range: (0.5, 2.0),
            a_low: 0.5,
            a_high: 2.0,
            delta: 1.0,
            x0_spread: 5.0,
            symmetric: false,
            switching: None,
            policy: SelectionPolicy::Sliding,
            horizon: DEFAULT_HORIZON,
        }
    }
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// Seeded random scenario whose every segment graph contains a spanning
/// in-tree, so the unbounded-interactions graph has a globally reachable
/// node.
pub fn random_connected(p: &RandomScenarioParams) -> Result<ScenarioConfig> {
    if p.n == 0 {
        return Err(Error::InvalidScenario("n must be positive".into()));
    }
    if !(p.edge_density > 0.0 && p.edge_density <= 1.0) {
        return Err(Error::InvalidScenario(format!(
            "edge density must lie in (0, 1], got {}",
            p.edge_density
        )));
    }
    let (w_lo, w_hi) = p.weight_range;
    if !(p.a_low <= w_lo && w_lo <= w_hi && w_hi <= p.a_high) {
        return Err(Error::InvalidScenario(format!(
            "weight range [{w_lo}, {w_hi}] not inside [{}, {}]",
            p.a_low, p.a_high
        )));
    }
    let quantizer = QuantizerSpec::uniform(p.delta)?;
    let mut rng = SplitMix64::seed_from_u64(p.seed);
    let weight = |rng: &mut SplitMix64| round12(rng.random_range(w_lo..=w_hi)).clamp(w_lo, w_hi);

    let count = p.switching.map_or(1, |s| s.graphs.max(1));
    let mut topology: Option<Vec<(usize, usize)>> = None;
    let mut segments = Vec::with_capacity(count);
    for k in 0..count {
        let pairs = match (&topology, p.switching.map(|s| s.vary_topology)) {
            (Some(t), Some(false)) => t.clone(),
            _ => random_topology(p, &mut rng),
        };
        topology = Some(pairs.clone());
        let mut edges = Vec::with_capacity(pairs.len() * 2);
        for (i, j) in pairs {
            let w = weight(&mut rng);
            edges.push((i, j, w));
            if p.symmetric {
                edges.push((j, i, w));
            }
        }
        let start = p.switching.map_or(0.0, |s| k as f64 * s.dwell);
        segments.push(Segment {
            start,
            graph: WeightedDigraph::from_edges(p.n, edges)?,
        });
    }
    let period = match p.switching {
        Some(s) if count > 1 => Some(count as f64 * s.dwell),
        _ => None,
    };
    let schedule = GraphSchedule::new(segments, period, p.a_low, p.a_high)?;
    let x0 = (0..p.n)
        .map(|_| round12(rng.random_range(0.0..=p.x0_spread)))
        .collect();
    let config = ScenarioConfig {
        name: Some(format!("random_n{}_seed{}", p.n, p.seed)),
        schedule,
        quantizer,
        x0,
        policy: p.policy.clone(),
        horizon: p.horizon,
        max_events: DEFAULT_MAX_EVENTS,
        expected: None,
    };
    config.validate()?;
    Ok(config)
}

/// Planted in-tree plus extra edges. In symmetric mode each unordered pair
/// appears once and is mirrored by the caller.
fn random_topology(p: &RandomScenarioParams, rng: &mut SplitMix64) -> Vec<(usize, usize)> {
    let n = p.n;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut present = vec![vec![false; n]; n];
    let mut pairs = Vec::new();
    for k in 1..n {
        let node = order[k];
        let parent = order[rng.random_range(0..k)];
        present[node][parent] = true;
        present[parent][node] |= p.symmetric;
        pairs.push((node, parent));
    }
    for i in 0..n {
        for j in 0..n {
            if i == j || present[i][j] || (p.symmetric && j < i) {
                continue;
            }
            if rng.random_bool(p.edge_density) {
                present[i][j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphkit::{has_globally_reachable_node, unbounded_interactions_graph};

    #[test]
    fn line_ramp_instances() {
        let c = line_ramp(3, 1.0).unwrap();
        let g = &c.schedule.segments()[0].graph;
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert_eq!(g.weight(i, j), 1.0);
        }
        assert_eq!(g.edges().count(), 4);
        assert_eq!(c.x0, vec![0.0, 1.0, 2.0]);
        assert_eq!(c.policy, SelectionPolicy::SequentialSlow);
        assert_eq!(line_ramp(4, 0.5).unwrap().x0, vec![0.0, 0.5, 1.0, 1.5]);
        assert!(line_ramp(2, 1.0).is_err());
    }

    #[test]
    fn slow_chain_instances() {
        let c = slow_chain(3, 1.0, 1.0).unwrap();
        assert_eq!(c.x0, vec![0.0, 0.5, 1.0]);
        assert_eq!(
            c.policy,
            SelectionPolicy::FixedAlpha { alpha: vec![AlphaOverride { agent: 1, alpha: 0.5 }] }
        );
        let c = slow_chain(5, 1.0, 1.0).unwrap();
        let SelectionPolicy::FixedAlpha { alpha } = &c.policy else { panic!() };
        let values: Vec<f64> = alpha.iter().map(|o| o.alpha).collect();
        assert_eq!(values, vec![0.125, 0.25, 0.5]);
        assert_eq!(c.schedule.segments()[0].graph.out_degree(4), 0.0);
        assert!(slow_chain(3, 2.0, 1.0).is_err());
    }

    #[test]
    fn random_is_deterministic_and_connected() {
        for seed in 0..50 {
            let p = RandomScenarioParams { seed, n: 1 + (seed as usize % 7), ..Default::default() };
            let a = random_connected(&p).unwrap();
            let b = random_connected(&p).unwrap();
            assert_eq!(a, b);
            assert!(has_globally_reachable_node(&unbounded_interactions_graph(&a.schedule)).is_some());
        }
        let a = random_connected(&RandomScenarioParams { seed: 1, ..Default::default() }).unwrap();
        let b = random_connected(&RandomScenarioParams { seed: 2, ..Default::default() }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn random_symmetric_is_balanced() {
        for seed in 0..30 {
            let p = RandomScenarioParams { seed, symmetric: true, ..Default::default() };
            assert!(random_connected(&p).unwrap().schedule.is_weight_balanced(1e-12));
        }
    }

    #[test]
    fn random_switching_keeps_topology_when_asked() {
        let p = RandomScenarioParams {
            seed: 3,
            switching: Some(Switching { graphs: 3, dwell: 0.5, vary_topology: false }),
            ..Default::default()
        };
        let c = random_connected(&p).unwrap();
        assert_eq!(c.schedule.segments().len(), 3);
        assert_eq!(c.schedule.period(), Some(1.5));
        assert!(c.schedule.has_time_invariant_topology());
        for seg in c.schedule.segments() {
            assert!(has_globally_reachable_node(&seg.graph).is_some());
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let c = slow_chain(4, 1.0, 2.0).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(ScenarioConfig::from_json(&s).unwrap(), c);
        let mut bad = c.clone();
        bad.x0.pop();
        assert!(bad.validate().is_err());
        let typo = s.replacen("\"horizon\"", "\"horizn\"", 1);
        assert!(ScenarioConfig::from_json(&typo).is_err());
    }

    #[test]
    fn single_agent_random() {
        let c = random_connected(&RandomScenarioParams { n: 1, ..Default::default() }).unwrap();
        assert_eq!(c.x0.len(), 1);
    }
}
