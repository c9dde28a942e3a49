//! Consensus detection, convergence time, bounds and conservation checks
//! over emitted trajectories.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::graphkit::GraphSchedule;
use crate::quantizer::{LevelRange, Position, QuantizerSpec};

/// Absolute tolerance on the drift of the average.
pub const AVERAGE_DRIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub t_con: Option<f64>,
    pub s_star: Option<f64>,
    pub q_infinity: Option<f64>,
    pub bound: Option<f64>,
    pub average_drift: f64,
    pub envelope_ok: bool,
    /// Second admissible limit level when all agents share one threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_star_alt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_max_deviation: Option<f64>,
}

/// Level indices common to every `Kq(x_i)`.
pub fn consensus_range(x: &[f64], quantizer: &QuantizerSpec) -> LevelRange {
    x.iter().fold(LevelRange { lo: i64::MIN, hi: i64::MAX }, |acc, &xi| {
        acc.intersect(&quantizer.krasovskii_range(xi))
    })
}

/// A level in every `Kq(x_i)`, the lower one when there are two.
pub fn consensus_level(x: &[f64], quantizer: &QuantizerSpec) -> Option<f64> {
    let r = consensus_range(x, quantizer);
    (!r.is_empty() && !x.is_empty()).then(|| quantizer.level(r.lo))
}

/// Kq level indices of each agent strictly inside the segment that starts
/// at an event with state `x` and velocity `v`.
fn segment_ranges<'a>(
    x: &'a [f64],
    v: &'a [f64],
    quantizer: &'a QuantizerSpec,
) -> impl Iterator<Item = LevelRange> + 'a {
    x.iter().zip(v).map(move |(&xi, &vi)| match quantizer.position(xi) {
        Position::Threshold(k) if vi > 0.0 => LevelRange::point(k + 1),
        Position::Threshold(k) if vi < 0.0 => LevelRange::point(k),
        _ => quantizer.krasovskii_range(xi),
    })
}

fn intersect_all(ranges: impl Iterator<Item = LevelRange>) -> LevelRange {
    ranges.fold(LevelRange { lo: i64::MIN, hi: i64::MAX }, |a, r| a.intersect(&r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub t_con: f64,
    pub s_star: f64,
    /// The upper level when the limit range holds two levels.
    pub s_star_alt: Option<f64>,
}

/// Earliest event time from which one level stays in every `Kq(x_i(t))`
/// for the rest of a certified trajectory.
pub fn convergence_time(traj: &Trajectory) -> Option<Convergence> {
    if !traj.is_certified() {
        return None;
    }
    let q = &traj.quantizer;
    let last = traj.events.len() - 1;
    let mut running = consensus_range(&traj.events[last].x, q);
    if running.is_empty() {
        return None;
    }
    let mut t_con = traj.events[last].t;
    for k in (0..last).rev() {
        let e = &traj.events[k];
        let seg = running.intersect(&intersect_all(segment_ranges(&e.x, &e.velocity, q)));
        if seg.is_empty() {
            break;
        }
        let point = seg.intersect(&consensus_range(&e.x, q));
        if point.is_empty() {
            break;
        }
        running = point;
        t_con = e.t;
    }
    Some(Convergence {
        t_con,
        s_star: q.level(running.lo),
        s_star_alt: (running.hi > running.lo).then(|| q.level(running.hi)),
    })
}

/// `(1/Delta) (N/a_L) (N a_U / a_L)^N max_ij |q(x_i(0)) - q(x_j(0))|`.
pub fn tcon_bound(a_low: f64, a_high: f64, x0: &[f64], quantizer: &QuantizerSpec) -> Result<f64> {
    let delta = quantizer
        .delta()
        .ok_or_else(|| Error::Unsupported("convergence-time bound needs a uniform quantizer".into()))?;
    if !(0.0 < a_low && a_low <= a_high) {
        return Err(Error::InvalidInput(format!("need 0 < a_low <= a_high, got [{a_low}, {a_high}]")));
    }
    let levels = x0.iter().map(|&x| quantizer.quantize(x)).collect::<Result<Vec<_>>>()?;
    let spread = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - levels.iter().copied().fold(f64::INFINITY, f64::min);
    if levels.is_empty() || spread == 0.0 {
        return Ok(0.0);
    }
    let n = x0.len() as f64;
    Ok((1.0 / delta) * (n / a_low) * (n * a_high / a_low).powi(x0.len() as i32) * spread)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub t: f64,
    /// `min_i min Kq(x_i)`.
    pub m: f64,
    /// `max_i max Kq(x_i)`.
    pub big_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub points: Vec<EnvelopePoint>,
    pub m_monotone: bool,
    pub big_m_monotone: bool,
    /// Event index and time of the first violation.
    pub first_violation: Option<(usize, f64)>,
    pub violations: usize,
}

impl EnvelopeReport {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// Envelope levels at every event. Monotonicity is checked over events and
/// the open segments between them.
pub fn envelopes(traj: &Trajectory) -> EnvelopeReport {
    let q = &traj.quantizer;
    let mut points = Vec::with_capacity(traj.events.len());
    let mut report = EnvelopeReport {
        points: Vec::new(),
        m_monotone: true,
        big_m_monotone: true,
        first_violation: None,
        violations: 0,
    };
    let mut prev: Option<(i64, i64)> = None;
    for (k, e) in traj.events.iter().enumerate() {
        let at_event = e.x.iter().map(|&xi| q.krasovskii_range(xi));
        let (lo, hi) = bounds(at_event);
        points.push(EnvelopePoint { t: e.t, m: q.level(lo), big_m: q.level(hi) });
        let (slo, shi) = bounds(segment_ranges(&e.x, &e.velocity, q));
        let seq = [(lo, hi), (slo, shi)];
        for (lo, hi) in seq {
            if let Some((plo, phi)) = prev {
                let m_bad = lo < plo;
                let big_m_bad = hi > phi;
                report.m_monotone &= !m_bad;
                report.big_m_monotone &= !big_m_bad;
                if m_bad || big_m_bad {
                    report.violations += 1;
                    report.first_violation.get_or_insert((k, e.t));
                }
            }
            prev = Some((lo, hi));
        }
    }
    report.points = points;
    report
}

fn bounds(ranges: impl Iterator<Item = LevelRange>) -> (i64, i64) {
    ranges.fold((i64::MAX, i64::MIN), |(lo, hi), r| (lo.min(r.lo), hi.max(r.hi)))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `max_t |mean x(t) - mean x(0)|` over events.
pub fn average_conservation(traj: &Trajectory) -> f64 {
    let Some(first) = traj.events.first() else { return 0.0 };
    if traj.n == 0 {
        return 0.0;
    }
    let m0 = mean(&first.x);
    traj.events.iter().map(|e| (mean(&e.x) - m0).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "snake_case")]
pub enum LimitVerdict {
    Pass,
    Fail(String),
    NotApplicable(String),
}

/// For balanced schedules the limit level is `q(mean x(0))`; when the mean
/// is a half-level the agents instead collocate at the mean.
pub fn limit_value_check(traj: &Trajectory, schedule: &GraphSchedule) -> LimitVerdict {
    let q = &traj.quantizer;
    let Some(delta) = q.delta() else {
        return LimitVerdict::NotApplicable("quantizer is not uniform".into());
    };
    if !schedule.is_weight_balanced(crate::graphkit::BALANCE_TOL) {
        return LimitVerdict::NotApplicable("schedule is not weight balanced".into());
    }
    let Some(conv) = convergence_time(traj) else {
        return LimitVerdict::NotApplicable("trajectory did not converge".into());
    };
    let avg = mean(&traj.initial().x);
    let half = (avg / delta - 0.5).round();
    let half_level = (avg - (half + 0.5) * delta).abs() <= AVERAGE_DRIFT_TOL;
    if half_level {
        let at = traj.state_at(conv.t_con);
        match at.iter().position(|xi| (xi - avg).abs() > AVERAGE_DRIFT_TOL) {
            None => LimitVerdict::Pass,
            Some(i) => LimitVerdict::Fail(format!(
                "half-level average {avg}: x_{}(t_con) = {} not at the average",
                i + 1,
                at[i]
            )),
        }
    } else {
        let expected = q.level(q.cell_index(avg));
        if conv.s_star == expected {
            LimitVerdict::Pass
        } else {
            LimitVerdict::Fail(format!("s* = {} but q(mean x(0)) = {expected}", conv.s_star))
        }
    }
}

/// Bound is attached when every segment shares one edge set and the
/// quantizer is uniform.
pub fn report(traj: &Trajectory, schedule: &GraphSchedule) -> ConvergenceReport {
    let conv = convergence_time(traj);
    let uniform = traj.quantizer.is_uniform();
    let bound = (uniform && schedule.has_time_invariant_topology())
        .then(|| tcon_bound(schedule.a_low(), schedule.a_high(), &traj.initial().x, &traj.quantizer).ok())
        .flatten();
    ConvergenceReport {
        converged: conv.is_some(),
        t_con: conv.map(|c| c.t_con),
        s_star: conv.map(|c| c.s_star),
        q_infinity: conv.filter(|_| uniform).map(|c| c.s_star),
        bound,
        average_drift: average_conservation(traj),
        envelope_ok: envelopes(traj).ok(),
        s_star_alt: conv.and_then(|c| c.s_star_alt),
        oracle_max_deviation: None,
    }
}
