//! Krasovskii selections on discontinuity surfaces.
//!
//! An agent sitting on a threshold either holds (zero velocity, selected
//! value anywhere between the two adjacent levels) or leaves: upward with the
//! upper level selected and positive velocity, downward with the lower level
//! and negative velocity. Finding a consistent assignment is a
//! box-constrained complementarity problem whose matrix is a principal
//! submatrix of the Laplacian.
//!
//! The held values solve `sum_j a_ij (z_j - z_i) = 0` over the held set.
//! Held agents that cannot reach any non-held agent form closed classes
//! whose equations only fix a common value; each sink class of that closed
//! part is pinned to a value inside the members' common Kq interval, which
//! leaves a nonsingular M-matrix system for the rest.

use nalgebra::{DMatrix, DVector};

use super::{Departure, Direction, SelectionPolicy};
use crate::error::{Error, Result};
use crate::graphkit::{strongly_connected_components, WeightedDigraph};
use crate::quantizer::{Position, QuantizerSpec};

/// Upper limit on the free classes enumerated by `SequentialSlow`.
const MAX_FREE_CLASS_CHOICES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolverOptions {
    /// Hold systems up to this size use dense LU; larger ones use
    /// Gauss-Seidel.
    pub dense_cutoff: usize,
    pub pgs_tol: f64,
    pub pgs_max_sweeps: usize,
    /// Relative tolerance on alpha bounds and on velocities treated as zero.
    pub tol: f64,
}

impl Default for ResolverOptions {
    fn default() -> Self {
        ResolverOptions {
            dense_cutoff: 512,
            pgs_tol: 1e-12,
            pgs_max_sweeps: 100_000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ResolveContext {
    pub t: f64,
    pub last_stopped: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub z: Vec<f64>,
    pub alpha: Vec<Option<f64>>,
    pub velocity: Vec<f64>,
    /// Surface agents with zero velocity.
    pub held: Vec<usize>,
    pub departing: Vec<Departure>,
}

impl Selection {
    pub fn is_rest(&self) -> bool {
        self.velocity.iter().all(|v| *v == 0.0)
    }

    pub fn movers(&self) -> impl Iterator<Item = usize> + '_ {
        self.velocity
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
    }
}

/// `v_i = sum_j a_ij (z_j - z_i)` after checking `z_i ∈ Kq(x_i)`.
pub fn selection_velocity(
    x: &[f64],
    quantizer: &QuantizerSpec,
    g: &WeightedDigraph,
    z: &[f64],
) -> Result<Vec<f64>> {
    if x.len() != g.n() || z.len() != g.n() {
        return Err(Error::InvalidInput(format!(
            "state and selection must have length {}",
            g.n()
        )));
    }
    for (i, (&xi, &zi)) in x.iter().zip(z).enumerate() {
        let (lo, hi) = quantizer.krasovskii_set(xi);
        if !(lo <= zi && zi <= hi) {
            return Err(Error::ContractViolation(format!(
                "z_{} = {zi} outside Kq(x_{}) = [{lo}, {hi}]",
                i + 1,
                i + 1
            )));
        }
    }
    Ok(raw_velocity(g, z))
}

fn raw_velocity(g: &WeightedDigraph, z: &[f64]) -> Vec<f64> {
    (0..g.n())
        .map(|i| g.out_edges(i).map(|(j, w)| w * (z[j] - z[i])).sum())
        .collect()
}

/// Computes the selection used on the segment starting at state `x`.
pub fn resolve_sliding(
    x: &[f64],
    quantizer: &QuantizerSpec,
    g: &WeightedDigraph,
    policy: &SelectionPolicy,
    ctx: &ResolveContext,
    opts: &ResolverOptions,
) -> Result<Selection> {
    if x.len() != g.n() {
        return Err(Error::InvalidInput(format!(
            "state has length {}, graph has {} agents",
            x.len(),
            g.n()
        )));
    }
    let s = Surfaces::new(x, quantizer);
    let none = vec![None; g.n()];
    match policy {
        SelectionPolicy::Sliding => resolve_with(g, &s, &none, FreeRule::Midpoint, ctx, opts),
        SelectionPolicy::SequentialSlow => resolve_slow(g, &s, ctx, opts),
        SelectionPolicy::FixedAlpha { alpha } => {
            policy.validate(g.n())?;
            let mut fixed = none.clone();
            for o in alpha {
                if s.on[o.agent] {
                    fixed[o.agent] = Some(o.alpha);
                }
            }
            if fixed.iter().all(Option::is_none) {
                return resolve_with(g, &s, &none, FreeRule::Midpoint, ctx, opts);
            }
            match resolve_with(g, &s, &fixed, FreeRule::Midpoint, ctx, opts) {
                Ok(sel) => Ok(sel),
                // Overrides no longer admissible here.
                Err(Error::NoSlidingSelection { .. }) => {
                    resolve_with(g, &s, &none, FreeRule::Midpoint, ctx, opts)
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Last-resort selection when no admissible hold/departure partition was
/// found: every surface agent takes the extreme of its Kq interval on the
/// side its neighbours pull towards.
pub(crate) fn extreme_selection(x: &[f64], quantizer: &QuantizerSpec, g: &WeightedDigraph) -> Selection {
    let s = Surfaces::new(x, quantizer);
    let mid: Vec<f64> = (0..g.n()).map(|i| 0.5 * (s.lo[i] + s.hi[i])).collect();
    let pull = raw_velocity(g, &mid);
    let z: Vec<f64> = (0..g.n())
        .map(|i| if pull[i] > 0.0 { s.hi[i] } else { s.lo[i] })
        .collect();
    let velocity = raw_velocity(g, &z);
    let mut alpha = vec![None; g.n()];
    let mut held = Vec::new();
    let mut departing = Vec::new();
    for i in (0..g.n()).filter(|&i| s.on[i]) {
        alpha[i] = Some(s.alpha(i, z[i]));
        match velocity[i] {
            v if v > 0.0 => departing.push(Departure { agent: i, direction: Direction::Up }),
            v if v < 0.0 => departing.push(Departure { agent: i, direction: Direction::Down }),
            _ => held.push(i),
        }
    }
    Selection { z, alpha, velocity, held, departing }
}

/// Per-agent Kq interval; `lo == hi` off the surfaces.
struct Surfaces {
    on: Vec<bool>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Surfaces {
    fn new(x: &[f64], q: &QuantizerSpec) -> Self {
        let mut s = Surfaces {
            on: Vec::with_capacity(x.len()),
            lo: Vec::with_capacity(x.len()),
            hi: Vec::with_capacity(x.len()),
        };
        for &xi in x {
            match q.position(xi) {
                Position::Cell(k) => {
                    s.on.push(false);
                    s.lo.push(q.level(k));
                    s.hi.push(q.level(k));
                }
                Position::Threshold(k) => {
                    s.on.push(true);
                    s.lo.push(q.level(k));
                    s.hi.push(q.level(k + 1));
                }
            }
        }
        s
    }

    fn alpha(&self, i: usize, z: f64) -> f64 {
        (z - self.lo[i]) / (self.hi[i] - self.lo[i])
    }
}

#[derive(Debug, Clone, Copy)]
enum FreeRule {
    Midpoint,
    /// Bit `k` set: free class `k` takes the upper end of its interval.
    Extremes(u32),
}

fn resolve_slow(
    g: &WeightedDigraph,
    s: &Surfaces,
    ctx: &ResolveContext,
    opts: &ResolverOptions,
) -> Result<Selection> {
    let none = vec![None; g.n()];
    let classes = {
        let held: Vec<bool> = s.on.clone();
        let mut z = initial_values(s, &none);
        solve_held(g, s, &mut z, &held, FreeRule::Extremes(0), opts)
    };
    let choices = 1u32 << classes.min(MAX_FREE_CLASS_CHOICES);
    let mut best: Option<((usize, bool), Selection)> = None;
    let mut last_err = None;
    for mask in 0..choices {
        match resolve_with(g, s, &none, FreeRule::Extremes(mask), ctx, opts) {
            Ok(sel) => {
                let movers: Vec<usize> = sel.movers().collect();
                let near_stopped = ctx.last_stopped.is_some_and(|k| {
                    movers.iter().any(|&i| g.has_edge(i, k) || g.has_edge(k, i))
                });
                let key = (movers.len(), !near_stopped);
                if best.as_ref().is_none_or(|(b, _)| key < *b) {
                    best = Some((key, sel));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some((_, sel)), _) => Ok(sel),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one candidate is tried"),
    }
}

fn initial_values(s: &Surfaces, fixed: &[Option<f64>]) -> Vec<f64> {
    (0..s.on.len())
        .map(|i| match fixed[i] {
            Some(a) => s.lo[i] + a * (s.hi[i] - s.lo[i]),
            None if s.on[i] => 0.5 * (s.lo[i] + s.hi[i]),
            None => s.lo[i],
        })
        .collect()
}

fn resolve_with(
    g: &WeightedDigraph,
    s: &Surfaces,
    fixed: &[Option<f64>],
    rule: FreeRule,
    ctx: &ResolveContext,
    opts: &ResolverOptions,
) -> Result<Selection> {
    let n = g.n();
    let mut z = initial_values(s, fixed);
    let mut held: Vec<bool> = (0..n).map(|i| s.on[i] && fixed[i].is_none()).collect();
    let mut dir: Vec<Option<Direction>> = vec![None; n];

    // Active set: release the worst violated hold, re-solve.
    loop {
        solve_held(g, s, &mut z, &held, rule, opts);
        let mut worst: Option<(usize, f64, Direction)> = None;
        for i in (0..n).filter(|&i| held[i]) {
            let a = s.alpha(i, z[i]);
            let (viol, d) = if a > 1.0 + opts.tol {
                (a - 1.0, Direction::Up)
            } else if a < -opts.tol {
                (-a, Direction::Down)
            } else {
                continue;
            };
            if worst.is_none_or(|(_, w, _)| viol > w) {
                worst = Some((i, viol, d));
            }
        }
        let Some((i, _, d)) = worst else { break };
        held[i] = false;
        dir[i] = Some(d);
        z[i] = match d {
            Direction::Up => s.hi[i],
            Direction::Down => s.lo[i],
        };
    }

    if let Some(sel) = finish(g, s, &z, &held, &dir, fixed, opts) {
        return Ok(sel);
    }

    // The release order guessed a wrong partition; let projected
    // Gauss-Seidel on the box problem pick it, then solve exactly.
    let free: Vec<bool> = (0..n).map(|i| s.on[i] && fixed[i].is_none()).collect();
    box_pgs(g, s, &mut z, &free, opts);
    let v = raw_velocity(g, &z);
    let vtol = velocity_tol(g, &z, opts);
    let ztol = opts.tol * (1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    for i in (0..n).filter(|&i| free[i]) {
        held[i] = true;
        dir[i] = None;
        if z[i] <= s.lo[i] + ztol && v[i] < -vtol {
            held[i] = false;
            dir[i] = Some(Direction::Down);
            z[i] = s.lo[i];
        } else if z[i] >= s.hi[i] - ztol && v[i] > vtol {
            held[i] = false;
            dir[i] = Some(Direction::Up);
            z[i] = s.hi[i];
        }
    }
    solve_held(g, s, &mut z, &held, rule, opts);
    let feasible = (0..n).filter(|&i| held[i]).all(|i| {
        let a = s.alpha(i, z[i]);
        (-opts.tol..=1.0 + opts.tol).contains(&a)
    });
    if feasible {
        if let Some(sel) = finish(g, s, &z, &held, &dir, fixed, opts) {
            return Ok(sel);
        }
    }
    Err(Error::NoSlidingSelection {
        t: ctx.t,
        reason: "no admissible hold/departure partition".into(),
    })
}

fn velocity_tol(g: &WeightedDigraph, z: &[f64], opts: &ResolverOptions) -> f64 {
    let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dmax = (0..g.n()).map(|i| g.out_degree(i)).fold(0.0f64, f64::max);
    opts.tol * (1.0 + zmax) * (1.0 + dmax)
}

/// Computes velocities and checks departures and fixed overrides. `None`
/// when some agent would leave its surface against its velocity.
fn finish(
    g: &WeightedDigraph,
    s: &Surfaces,
    z: &[f64],
    held: &[bool],
    dir: &[Option<Direction>],
    fixed: &[Option<f64>],
    opts: &ResolverOptions,
) -> Option<Selection> {
    let n = g.n();
    let mut z = z.to_vec();
    for i in (0..n).filter(|&i| held[i]) {
        z[i] = z[i].clamp(s.lo[i], s.hi[i]);
    }
    let mut velocity = raw_velocity(g, &z);
    let vtol = velocity_tol(g, &z, opts);
    let mut alpha = vec![None; n];
    let mut held_out = Vec::new();
    let mut departing = Vec::new();
    for i in 0..n {
        if velocity[i].abs() <= vtol {
            velocity[i] = 0.0;
        }
        if !s.on[i] {
            continue;
        }
        let a = s.alpha(i, z[i]);
        alpha[i] = Some(a);
        if held[i] {
            velocity[i] = 0.0;
            held_out.push(i);
            continue;
        }
        let v = velocity[i];
        if v == 0.0 {
            held_out.push(i);
            continue;
        }
        let direction = if v > 0.0 { Direction::Up } else { Direction::Down };
        let admissible = match (dir[i], fixed[i]) {
            (Some(d), _) => d == direction,
            (None, Some(_)) => match direction {
                Direction::Up => z[i] == s.hi[i],
                Direction::Down => z[i] == s.lo[i],
            },
            (None, None) => false,
        };
        if !admissible {
            return None;
        }
        departing.push(Departure { agent: i, direction });
    }
    Some(Selection {
        z,
        alpha,
        velocity,
        held: held_out,
        departing,
    })
}

/// Solves the hold equations for agents with `held[i]`, writing their
/// values into `z`. Returns the number of free classes that were pinned.
fn solve_held(
    g: &WeightedDigraph,
    s: &Surfaces,
    z: &mut [f64],
    held: &[bool],
    rule: FreeRule,
    opts: &ResolverOptions,
) -> usize {
    let n = g.n();
    let mut anchored = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&i| held[i] && g.out_edges(i).any(|(j, _)| !held[j]))
        .collect();
    for &i in &stack {
        anchored[i] = true;
    }
    while let Some(u) = stack.pop() {
        for i in 0..n {
            if held[i] && !anchored[i] && g.has_edge(i, u) {
                anchored[i] = true;
                stack.push(i);
            }
        }
    }

    let closed: Vec<usize> = (0..n).filter(|&i| held[i] && !anchored[i]).collect();
    let mut pinned = vec![false; n];
    let mut classes = 0;
    if !closed.is_empty() {
        let sub = DMatrix::from_fn(closed.len(), closed.len(), |r, c| g.weight(closed[r], closed[c]));
        let sub = WeightedDigraph::from_matrix(sub).expect("induced subgraph of a valid graph");
        let cond = strongly_connected_components(&sub);
        let mut sinks: Vec<Vec<usize>> = cond
            .sinks()
            .into_iter()
            .map(|c| cond.components[c].iter().map(|&k| closed[k]).collect())
            .collect();
        sinks.sort();
        classes = sinks.len();
        for (ci, members) in sinks.iter().enumerate() {
            let lo = members.iter().map(|&i| s.lo[i]).fold(f64::NEG_INFINITY, f64::max);
            let hi = members.iter().map(|&i| s.hi[i]).fold(f64::INFINITY, f64::min);
            let value = match rule {
                FreeRule::Extremes(mask) if lo <= hi => {
                    if ci < 32 && mask >> ci & 1 == 1 {
                        hi
                    } else {
                        lo
                    }
                }
                // An empty intersection falls back to the midpoint of the
                // gap; the violated holds are then released.
                _ => 0.5 * (lo + hi),
            };
            for &i in members {
                z[i] = value;
                pinned[i] = true;
            }
        }
    }

    let unknown: Vec<usize> = (0..n).filter(|&i| held[i] && !pinned[i]).collect();
    if unknown.is_empty() {
        return classes;
    }
    let m = unknown.len();
    let mut local = vec![usize::MAX; n];
    for (r, &i) in unknown.iter().enumerate() {
        local[i] = r;
    }
    // Row r: diag[r] * z_r - sum(w * z_c over off) = b[r].
    let mut diag = vec![0.0; m];
    let mut off: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut b = vec![0.0; m];
    for (r, &i) in unknown.iter().enumerate() {
        for (j, w) in g.out_edges(i) {
            diag[r] += w;
            match local[j] {
                usize::MAX => b[r] += w * z[j],
                c => off[r].push((c, w)),
            }
        }
    }
    let dense = (m <= opts.dense_cutoff)
        .then(|| {
            let mut a = DMatrix::<f64>::from_diagonal(&DVector::from_column_slice(&diag));
            for (r, row) in off.iter().enumerate() {
                for &(c, w) in row {
                    a[(r, c)] -= w;
                }
            }
            a.lu().solve(&DVector::from_column_slice(&b))
        })
        .flatten();
    match dense {
        Some(sol) => {
            for (r, &i) in unknown.iter().enumerate() {
                z[i] = sol[r];
            }
        }
        None => {
            let mut x: Vec<f64> = unknown.iter().map(|&i| z[i]).collect();
            gauss_seidel(&diag, &off, &b, &mut x, opts);
            for (r, &i) in unknown.iter().enumerate() {
                z[i] = x[r];
            }
        }
    }
    classes
}

fn gauss_seidel(diag: &[f64], off: &[Vec<(usize, f64)>], b: &[f64], x: &mut [f64], opts: &ResolverOptions) {
    for _ in 0..opts.pgs_max_sweeps {
        let mut change = 0.0f64;
        for r in 0..x.len() {
            if diag[r] == 0.0 {
                continue;
            }
            let new = (b[r] + off[r].iter().map(|&(c, w)| w * x[c]).sum::<f64>()) / diag[r];
            change = change.max((new - x[r]).abs());
            x[r] = new;
        }
        if change <= opts.pgs_tol * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            break;
        }
    }
}

/// Projected Gauss-Seidel on the box problem: each free agent moves to the
/// weighted mean of its neighbours, clipped to its Kq interval.
fn box_pgs(g: &WeightedDigraph, s: &Surfaces, z: &mut [f64], free: &[bool], opts: &ResolverOptions) {
    let rows: Vec<(usize, f64, Vec<(usize, f64)>)> = (0..g.n())
        .filter(|&i| free[i] && g.out_degree(i) > 0.0)
        .map(|i| (i, g.out_degree(i), g.out_edges(i).collect()))
        .collect();
    for _ in 0..opts.pgs_max_sweeps {
        let mut change = 0.0f64;
        for (i, deg, edges) in &rows {
            let i = *i;
            let mean = edges.iter().map(|&(j, w)| w * z[j]).sum::<f64>() / deg;
            let new = mean.clamp(s.lo[i], s.hi[i]);
            change = change.max((new - z[i]).abs());
            z[i] = new;
        }
        if change <= opts.pgs_tol * (1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            break;
        }
    }
}
