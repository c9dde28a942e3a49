use super::resolver::extreme_selection;
use super::{
    resolve_sliding, Departure, EventKind, ResolveContext, ResolverOptions, Selection, SelectionPolicy,
    Termination, Trajectory, TrajectoryEvent,
};
use crate::error::{Error, Result};
use crate::graphkit::{GraphSchedule, ScheduleCursor};
use crate::quantizer::QuantizerSpec;
use crate::scenarios::ScenarioConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub policy: SelectionPolicy,
    pub horizon: f64,
    pub max_events: usize,
    pub resolver: ResolverOptions,
    /// Relative window inside which event times count as coincident.
    pub coincidence_tol: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            policy: SelectionPolicy::Sliding,
            horizon: f64::INFINITY,
            max_events: 100_000,
            resolver: ResolverOptions::default(),
            coincidence_tol: 1e-12,
        }
    }
}

impl SimulationOptions {
    pub fn for_scenario(config: &ScenarioConfig) -> Self {
        SimulationOptions {
            policy: config.policy.clone(),
            horizon: config.horizon,
            max_events: config.max_events,
            ..Default::default()
        }
    }
}

/// Where the affine segment starting at `t` ends.
#[derive(Debug, Clone, PartialEq)]
pub struct EventPlan {
    pub t: f64,
    /// Agents reaching a threshold at `t`, with the threshold value.
    pub hits: Vec<(usize, f64)>,
    pub switch: bool,
    pub horizon: bool,
}

/// Earliest threshold crossing, schedule switch or horizon after `t`.
/// `None` when nothing can happen (no motion and no bounded stop time).
pub fn next_event(
    t: f64,
    x: &[f64],
    velocity: &[f64],
    quantizer: &QuantizerSpec,
    switch_at: Option<f64>,
    horizon: f64,
    tol: f64,
) -> Option<EventPlan> {
    let reach: Vec<Option<(f64, f64)>> = x
        .iter()
        .zip(velocity)
        .map(|(&xi, &v)| {
            if v == 0.0 {
                return None;
            }
            let th = quantizer.next_threshold(xi, if v > 0.0 { 1 } else { -1 })?;
            Some(((th - xi) / v, th))
        })
        .collect();
    let switch_dt = switch_at.map(|s| s - t);
    let horizon_dt = horizon - t;
    let dt = reach
        .iter()
        .flatten()
        .map(|r| r.0)
        .chain(switch_dt)
        .chain(std::iter::once(horizon_dt))
        .fold(f64::INFINITY, f64::min);
    if !dt.is_finite() {
        return None;
    }
    let within = |d: f64| d <= dt + tol * dt.abs().max(f64::MIN_POSITIVE);
    let switch = switch_dt.is_some_and(within);
    let at_horizon = within(horizon_dt);
    let t_next = if switch {
        switch_at.unwrap()
    } else if at_horizon {
        horizon
    } else {
        t + dt
    };
    let hits = reach
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.filter(|r| within(r.0)).map(|r| (i, r.1)))
        .collect();
    Some(EventPlan {
        t: t_next,
        hits,
        switch,
        horizon: at_horizon,
    })
}

pub fn simulate(config: &ScenarioConfig) -> Result<Trajectory> {
    config.validate()?;
    simulate_with(
        &config.schedule,
        &config.quantizer,
        &config.x0,
        &SimulationOptions::for_scenario(config),
        |_| false,
    )
}

/// Runs the event loop until a certified equilibrium, the horizon, or until
/// `stop` returns true for an emitted event.
pub fn simulate_with(
    schedule: &GraphSchedule,
    quantizer: &QuantizerSpec,
    x0: &[f64],
    opts: &SimulationOptions,
    mut stop: impl FnMut(&TrajectoryEvent) -> bool,
) -> Result<Trajectory> {
    let n = schedule.n();
    if x0.len() != n {
        return Err(Error::InvalidInput(format!(
            "x0 has length {}, schedule has {n} agents",
            x0.len()
        )));
    }
    if let Some(v) = x0.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite initial state {v}")));
    }
    if !(opts.horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {}", opts.horizon)));
    }
    opts.policy.validate(n)?;

    let mut traj = Trajectory {
        n,
        quantizer: quantizer.clone(),
        events: Vec::new(),
        termination: Termination::Incomplete,
    };
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut cursor = schedule.cursor_at(0.0);
    let mut kinds = vec![EventKind::Start];
    let mut hits: Vec<usize> = Vec::new();
    let mut ctx = ResolveContext::default();
    let mut prev_velocity: Option<Vec<f64>> = None;

    loop {
        ctx.t = t;
        if let Some(&h) = hits.first() {
            ctx.last_stopped = Some(h);
        }
        let g = schedule.graph(cursor);
        let sel = resolve(&x, quantizer, g, &opts.policy, &ctx, &opts.resolver)?;
        if let Some(prev) = &prev_velocity {
            if let Some(i) = (0..n).find(|&i| prev[i] != 0.0 && sel.velocity[i] == 0.0) {
                ctx.last_stopped = Some(i);
            }
        }
        if !sel.departing.is_empty() {
            kinds.push(EventKind::SurfaceDeparture);
        }
        let rest = sel.is_rest() && rests_from(schedule, cursor, &x, quantizer, opts, &ctx)?;
        if rest {
            kinds.push(EventKind::Equilibrium);
        }
        if traj.events.len() >= opts.max_events {
            return Err(Error::MaxEventsExceeded {
                limit: opts.max_events,
                partial: Box::new(traj),
            });
        }
        let Selection {
            z,
            alpha,
            velocity,
            departing,
            ..
        } = sel;
        let departures: Vec<Departure> = departing;
        traj.events.push(TrajectoryEvent {
            t,
            kinds: std::mem::take(&mut kinds),
            x: x.clone(),
            z,
            alpha,
            velocity: velocity.clone(),
            hits: std::mem::take(&mut hits),
            departures,
            segment: cursor.index,
        });
        let event = traj.events.last_mut().expect("just pushed");
        if rest {
            traj.termination = Termination::Equilibrium;
            return Ok(traj);
        }
        if event.has(EventKind::Horizon) {
            traj.termination = Termination::Horizon;
            return Ok(traj);
        }
        if stop(event) {
            event.kinds.push(EventKind::Stopped);
            traj.termination = Termination::Stopped;
            return Ok(traj);
        }

        let switch = schedule.next_switch(cursor);
        let Some(plan) = next_event(
            t,
            &x,
            &velocity,
            quantizer,
            switch.map(|s| s.0),
            opts.horizon,
            opts.coincidence_tol,
        ) else {
            // Unreachable with a finite horizon; an infinite one with
            // nothing left to happen is a rest we could not certify.
            traj.termination = Termination::Incomplete;
            return Ok(traj);
        };

        let dt = plan.t - t;
        let mut hit_flags = vec![false; n];
        for &(i, th) in &plan.hits {
            x[i] = th;
            hit_flags[i] = true;
        }
        for i in 0..n {
            if hit_flags[i] || velocity[i] == 0.0 {
                continue;
            }
            let moved = x[i] + velocity[i] * dt;
            // Rounding may carry an agent past a threshold it should stop on.
            let dir = if velocity[i] > 0.0 { 1 } else { -1 };
            match quantizer.next_threshold(x[i], dir) {
                Some(th) if (dir > 0 && moved >= th) || (dir < 0 && moved <= th) => {
                    x[i] = th;
                    hit_flags[i] = true;
                }
                _ => x[i] = moved,
            }
        }
        hits = (0..n).filter(|&i| hit_flags[i]).collect();
        if !hits.is_empty() {
            kinds.push(EventKind::ThresholdHit);
        }
        if plan.switch {
            kinds.push(EventKind::TopologySwitch);
            cursor = switch.expect("switch planned").1;
        }
        if plan.horizon {
            kinds.push(EventKind::Horizon);
        }
        t = plan.t;
        prev_velocity = Some(velocity);
    }
}

fn resolve(
    x: &[f64],
    quantizer: &QuantizerSpec,
    g: &crate::graphkit::WeightedDigraph,
    policy: &SelectionPolicy,
    ctx: &ResolveContext,
    opts: &ResolverOptions,
) -> Result<Selection> {
    match resolve_sliding(x, quantizer, g, policy, ctx, opts) {
        Err(Error::NoSlidingSelection { .. }) => Ok(extreme_selection(x, quantizer, g)),
        other => other,
    }
}

/// Whether `x` stays at rest under every graph the schedule can still use.
fn rests_from(
    schedule: &GraphSchedule,
    cursor: ScheduleCursor,
    x: &[f64],
    quantizer: &QuantizerSpec,
    opts: &SimulationOptions,
    ctx: &ResolveContext,
) -> Result<bool> {
    let upcoming = match schedule.period() {
        Some(_) => 0,
        None => cursor.index + 1,
    };
    for (k, seg) in schedule.segments().iter().enumerate().skip(upcoming) {
        if k == cursor.index {
            continue;
        }
        let sel = resolve(x, quantizer, &seg.graph, &opts.policy, ctx, &opts.resolver)?;
        if !sel.is_rest() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphkit::{Segment, WeightedDigraph};

    fn line(n: usize) -> WeightedDigraph {
        let mut e = Vec::new();
        for i in 0..n - 1 {
            e.push((i, i + 1, 1.0));
            e.push((i + 1, i, 1.0));
        }
        WeightedDigraph::from_edges(n, e).unwrap()
    }

    fn run(g: WeightedDigraph, x0: &[f64], policy: SelectionPolicy) -> Trajectory {
        let s = GraphSchedule::constant(g, 1.0, 1.0).unwrap();
        let q = QuantizerSpec::uniform(1.0).unwrap();
        let opts = SimulationOptions { policy, horizon: 100.0, ..Default::default() };
        simulate_with(&s, &q, x0, &opts, |_| false).unwrap()
    }

    #[test]
    fn line3_reference_trace() {
        let tr = run(line(3), &[0.0, 1.0, 2.0], SelectionPolicy::Sliding);
        assert_eq!(tr.events.len(), 2);
        let e0 = &tr.events[0];
        assert_eq!(e0.kinds, vec![EventKind::Start]);
        assert_eq!(e0.velocity, vec![1.0, 0.0, -1.0]);
        let e1 = &tr.events[1];
        assert_eq!(e1.t, 0.5);
        assert_eq!(e1.kinds, vec![EventKind::ThresholdHit, EventKind::Equilibrium]);
        assert_eq!(e1.x, vec![0.5, 1.0, 1.5]);
        assert_eq!(e1.hits, vec![0, 2]);
        assert_eq!(tr.termination, Termination::Equilibrium);
    }

    #[test]
    fn line4_sliding_trace() {
        let tr = run(line(4), &[0.0, 1.0, 2.0, 3.0], SelectionPolicy::Sliding);
        let times: Vec<f64> = tr.events.iter().map(|e| e.t).collect();
        assert_eq!(times[..3], [0.0, 0.5, 1.0]);
        let last = tr.last();
        assert!((last.t - 4.0).abs() < 1e-12, "{times:?}");
        for xi in &last.x {
            assert_eq!(*xi, 1.5);
        }
        assert!(tr.is_certified());
    }

    #[test]
    fn immediate_equilibrium_is_one_event() {
        let tr = run(line(3), &[0.1, 0.2, -0.3], SelectionPolicy::Sliding);
        assert_eq!(tr.events.len(), 1);
        assert_eq!(tr.events[0].kinds, vec![EventKind::Start, EventKind::Equilibrium]);
    }

    #[test]
    fn symmetric_pair_meets_on_half_level() {
        let tr = run(line(2), &[0.0, 1.0], SelectionPolicy::Sliding);
        assert_eq!(tr.last().x, vec![0.5, 0.5]);
        assert_eq!(tr.last().t, 0.5);
    }

    #[test]
    fn horizon_cuts_run() {
        let s = GraphSchedule::constant(line(4), 1.0, 1.0).unwrap();
        let q = QuantizerSpec::uniform(1.0).unwrap();
        let opts = SimulationOptions { horizon: 2.0, ..Default::default() };
        let tr = simulate_with(&s, &q, &[0.0, 1.0, 2.0, 3.0], &opts, |_| false).unwrap();
        assert_eq!(tr.termination, Termination::Horizon);
        assert_eq!(tr.end_time(), 2.0);
        assert!(tr.last().has(EventKind::Horizon));
    }

    #[test]
    fn event_limit_returns_partial() {
        let s = GraphSchedule::constant(line(4), 1.0, 1.0).unwrap();
        let q = QuantizerSpec::uniform(1.0).unwrap();
        let opts = SimulationOptions { max_events: 2, ..Default::default() };
        match simulate_with(&s, &q, &[0.0, 1.0, 2.0, 3.0], &opts, |_| false) {
            Err(Error::MaxEventsExceeded { limit, partial }) => {
                assert_eq!(limit, 2);
                assert_eq!(partial.events.len(), 2);
                assert_eq!(partial.termination, Termination::Incomplete);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stop_callback() {
        let s = GraphSchedule::constant(line(4), 1.0, 1.0).unwrap();
        let q = QuantizerSpec::uniform(1.0).unwrap();
        let tr = simulate_with(&s, &q, &[0.0, 1.0, 2.0, 3.0], &SimulationOptions::default(), |e| e.t >= 0.5).unwrap();
        assert_eq!(tr.termination, Termination::Stopped);
        assert_eq!(tr.end_time(), 0.5);
        assert_eq!(tr.state_at(0.75), vec![0.5, 1.25, 1.75, 2.5]);
    }

    #[test]
    fn switching_schedule_emits_switch_events() {
        let g1 = WeightedDigraph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let g2 = WeightedDigraph::from_edges(2, [(1, 0, 1.0)]).unwrap();
        let s = GraphSchedule::new(
            vec![Segment { start: 0.0, graph: g1 }, Segment { start: 0.25, graph: g2 }],
            Some(0.5),
            1.0,
            1.0,
        )
        .unwrap();
        let q = QuantizerSpec::uniform(1.0).unwrap();
        let opts = SimulationOptions { horizon: 10.0, ..Default::default() };
        let tr = simulate_with(&s, &q, &[0.0, 3.0], &opts, |_| false).unwrap();
        assert!(tr.events.iter().any(|e| e.has(EventKind::TopologySwitch)));
        assert!(tr.is_certified());
        assert!(tr.check_invariants(&s, 1e-9).is_empty());
        let last = tr.last();
        let r = q.krasovskii_range(last.x[0]).intersect(&q.krasovskii_range(last.x[1]));
        assert!(!r.is_empty());
    }

    #[test]
    fn next_event_merges_coincident_hits() {
        let q = QuantizerSpec::uniform(1.0).unwrap();
        let plan = next_event(0.0, &[0.0, 1.0, 0.2], &[1.0, -1.0, 0.0], &q, Some(0.5), 10.0, 1e-12).unwrap();
        assert_eq!(plan.t, 0.5);
        assert_eq!(plan.hits, vec![(0, 0.5), (1, 0.5)]);
        assert!(plan.switch);
        assert!(next_event(0.0, &[0.0], &[0.0], &q, None, f64::INFINITY, 1e-12).is_none());
    }
}
