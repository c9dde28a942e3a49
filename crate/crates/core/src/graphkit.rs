//! Weighted digraphs, piecewise-constant schedules of them, and their
//! connectivity structure.
//!
//! Orientation: `weight(i, j) > 0` means agent `i` listens to agent `j`, and
//! the edge `(i, j)` points from `i` to `j`. Paths follow edges, so a
//! globally reachable node is one every agent (transitively) listens to. It
//! lives in the unique sink of the condensation.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for [`is_weight_balanced`].
pub const BALANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    weights: DMatrix<f64>,
}

impl WeightedDigraph {
    pub fn empty(n: usize) -> Self {
        WeightedDigraph {
            weights: DMatrix::zeros(n, n),
        }
    }

    /// Builds a graph from `(i, j, w)` triples with 0-based indices.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut g = Self::empty(n);
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self loop at agent {i}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "weight of ({i}, {j}) must be finite and nonnegative, got {w}"
                )));
            }
            if g.weights[(i, j)] != 0.0 {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
            g.weights[(i, j)] = w;
        }
        Ok(g)
    }

    /// Builds a graph from a dense matrix; the diagonal must be zero.
    pub fn from_matrix(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::InvalidGraph("weight matrix must be square".into()));
        }
        for i in 0..weights.nrows() {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at agent {i}")));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidGraph("weights must be finite and nonnegative".into()));
        }
        Ok(WeightedDigraph { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weights[(i, j)] > 0.0
    }

    /// Agents that `i` listens to, with weights.
    pub fn out_edges(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n()).filter_map(move |j| {
            let w = self.weights[(i, j)];
            (w > 0.0).then_some((j, w))
        })
    }

    pub fn out_degree(&self, i: usize) -> f64 {
        self.weights.row(i).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| self.out_edges(i).map(move |(j, w)| (i, j, w)))
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges().map(|(i, j, _)| (i, j)).collect()
    }

    pub fn check_bounds(&self, a_low: f64, a_high: f64) -> Result<()> {
        for (i, j, w) in self.edges() {
            if w < a_low || w > a_high {
                return Err(Error::InvalidGraph(format!(
                    "weight {w} of edge ({i}, {j}) outside [{a_low}, {a_high}]"
                )));
            }
        }
        Ok(())
    }
}

/// Strongly connected components and the acyclic graph between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condensation {
    /// Components in reverse topological order: every dag edge `h -> k`
    /// has `k < h`, so sinks come first.
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    pub dag: BTreeSet<(usize, usize)>,
}

impl Condensation {
    pub fn sinks(&self) -> Vec<usize> {
        let mut has_out = vec![false; self.components.len()];
        for &(h, _) in &self.dag {
            has_out[h] = true;
        }
        (0..self.components.len()).filter(|&c| !has_out[c]).collect()
    }

    /// Every pair of components is ordered by reachability one way or the
    /// other.
    pub fn is_pairwise_connected(&self) -> bool {
        let s = self.components.len();
        let reach = self.dag_closure();
        (0..s).all(|h| (0..s).all(|k| h == k || reach[h][k] || reach[k][h]))
    }

    /// The dag is connected when edge directions are ignored.
    pub fn is_weakly_connected(&self) -> bool {
        let s = self.components.len();
        if s == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); s];
        for &(h, k) in &self.dag {
            adj[h].push(k);
            adj[k].push(h);
        }
        let mut seen = vec![false; s];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(c) = stack.pop() {
            for &d in &adj[c] {
                if !seen[d] {
                    seen[d] = true;
                    stack.push(d);
                }
            }
        }
        seen.into_iter().all(|b| b)
    }

    fn dag_closure(&self) -> Vec<Vec<bool>> {
        let s = self.components.len();
        let mut reach = vec![vec![false; s]; s];
        // Sinks first, so successors are complete when a node is processed.
        for h in 0..s {
            reach[h][h] = true;
            for &(a, k) in self.dag.range((h, 0)..(h + 1, 0)) {
                debug_assert_eq!(a, h);
                for m in 0..s {
                    if reach[k][m] {
                        reach[h][m] = true;
                    }
                }
            }
        }
        reach
    }
}

/// Tarjan's algorithm, iterative.
pub fn strongly_connected_components(g: &WeightedDigraph) -> Condensation {
    let n = g.n();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| g.out_edges(i).map(|(j, _)| j).collect()).collect();

    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut component_of = vec![UNSEEN; n];
    let mut next = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        // (node, position in its adjacency list)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let id = components.len();
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component_of[w] = id;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }

    let mut dag = BTreeSet::new();
    for (i, j, _) in g.edges() {
        let (h, k) = (component_of[i], component_of[j]);
        if h != k {
            dag.insert((h, k));
        }
    }
    assert!(
        dag.iter().all(|&(h, k)| k < h),
        "condensation is not acyclic"
    );
    Condensation {
        components,
        component_of,
        dag,
    }
}

/// A node that every other node can reach, if one exists. The witness is the
/// smallest index in the unique sink component.
pub fn has_globally_reachable_node(g: &WeightedDigraph) -> Option<usize> {
    if g.n() == 0 {
        return None;
    }
    let c = strongly_connected_components(g);
    match c.sinks().as_slice() {
        [sink] => Some(c.components[*sink][0]),
        _ => None,
    }
}

/// Consensus hypothesis on a graph: the condensation is connected and has a
/// single sink. In a finite dag a single sink already forces connectivity.
pub fn satisfies_connectivity_hypothesis(g: &WeightedDigraph) -> bool {
    let c = strongly_connected_components(g);
    c.sinks().len() == 1 && c.is_weakly_connected()
}

pub fn is_weight_balanced(g: &WeightedDigraph, tol: f64) -> bool {
    let w = g.weights();
    (0..g.n()).all(|i| (w.row(i).sum() - w.column(i).sum()).abs() <= tol)
}

/// `L[u][v] = -a_uv` off the diagonal, `L[u][u] = sum_v a_uv`.
pub fn laplacian(g: &WeightedDigraph) -> DMatrix<f64> {
    let mut l = -g.weights().clone();
    for i in 0..g.n() {
        l[(i, i)] = g.out_degree(i);
    }
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub graph: WeightedDigraph,
}

/// Piecewise-constant weighted graph signal. Without a period the last
/// segment holds forever; with one, the segment list repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleWire", into = "ScheduleWire")]
pub struct GraphSchedule {
    segments: Vec<Segment>,
    period: Option<f64>,
    a_low: f64,
    a_high: f64,
}

/// Position inside a schedule: repetition count and segment index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScheduleCursor {
    pub cycle: u64,
    pub index: usize,
}

impl GraphSchedule {
    pub fn new(segments: Vec<Segment>, period: Option<f64>, a_low: f64, a_high: f64) -> Result<Self> {
        if !(a_low.is_finite() && a_high.is_finite() && 0.0 < a_low && a_low <= a_high) {
            return Err(Error::InvalidSchedule(format!(
                "need 0 < a_low <= a_high, got [{a_low}, {a_high}]"
            )));
        }
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidSchedule("no segments".into()))?;
        if first.start != 0.0 {
            return Err(Error::InvalidSchedule("first segment must start at t = 0".into()));
        }
        let n = first.graph.n();
        for w in segments.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(Error::InvalidSchedule(format!(
                    "segment starts must strictly increase ({} then {})",
                    w[0].start, w[1].start
                )));
            }
        }
        for s in &segments {
            if !s.start.is_finite() {
                return Err(Error::InvalidSchedule("non-finite segment start".into()));
            }
            if s.graph.n() != n {
                return Err(Error::InvalidSchedule("segments disagree on agent count".into()));
            }
            s.graph.check_bounds(a_low, a_high)?;
        }
        if let Some(p) = period {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidSchedule(format!("period must be positive, got {p}")));
            }
            let last = segments.last().map(|s| s.start).unwrap_or(0.0);
            if last >= p {
                return Err(Error::InvalidSchedule(format!(
                    "segment start {last} not inside period {p}"
                )));
            }
        }
        Ok(GraphSchedule {
            segments,
            period,
            a_low,
            a_high,
        })
    }

    pub fn constant(graph: WeightedDigraph, a_low: f64, a_high: f64) -> Result<Self> {
        Self::new(vec![Segment { start: 0.0, graph }], None, a_low, a_high)
    }

    pub fn n(&self) -> usize {
        self.segments[0].graph.n()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn a_low(&self) -> f64 {
        self.a_low
    }

    pub fn a_high(&self) -> f64 {
        self.a_high
    }

    pub fn graph(&self, cursor: ScheduleCursor) -> &WeightedDigraph {
        &self.segments[cursor.index].graph
    }

    pub fn cursor_at(&self, t: f64) -> ScheduleCursor {
        let (cycle, local) = match self.period {
            Some(p) => {
                let c = (t / p).floor().max(0.0);
                (c as u64, t - c * p)
            }
            None => (0, t),
        };
        let index = self.segments.partition_point(|s| s.start <= local).saturating_sub(1);
        ScheduleCursor { cycle, index }
    }

    pub fn graph_at(&self, t: f64) -> &WeightedDigraph {
        self.graph(self.cursor_at(t))
    }

    /// Time and cursor of the next switch after `cursor`'s segment, if the
    /// dynamics can still change.
    pub fn next_switch(&self, cursor: ScheduleCursor) -> Option<(f64, ScheduleCursor)> {
        let next = cursor.index + 1;
        match self.period {
            None => self.segments.get(next).map(|s| {
                (
                    s.start,
                    ScheduleCursor {
                        cycle: 0,
                        index: next,
                    },
                )
            }),
            Some(_) if self.segments.len() == 1 => None,
            Some(p) => {
                if next < self.segments.len() {
                    let t = cursor.cycle as f64 * p + self.segments[next].start;
                    Some((t, ScheduleCursor { cycle: cursor.cycle, index: next }))
                } else {
                    let cycle = cursor.cycle + 1;
                    Some((cycle as f64 * p, ScheduleCursor { cycle, index: 0 }))
                }
            }
        }
    }

    /// No further switch can change the graph after `cursor`.
    pub fn is_static_from(&self, cursor: ScheduleCursor) -> bool {
        self.next_switch(cursor).is_none()
    }

    /// Same edge set in every segment (weights may differ).
    pub fn has_time_invariant_topology(&self) -> bool {
        let e = self.segments[0].graph.edge_set();
        self.segments.iter().all(|s| s.graph.edge_set() == e)
    }

    pub fn is_weight_balanced(&self, tol: f64) -> bool {
        self.segments.iter().all(|s| is_weight_balanced(&s.graph, tol))
    }
}

/// Edges whose weight has a divergent integral. Weights are bounded below
/// by `a_low` when positive, so an edge qualifies iff it is active on a set
/// of infinite measure: in some segment of positive length of one period,
/// or in the final holding segment.
pub fn unbounded_interactions_graph(s: &GraphSchedule) -> WeightedDigraph {
    let n = s.n();
    let active: Vec<&Segment> = match s.period() {
        None => vec![s.segments().last().expect("schedule has segments")],
        Some(_) => s.segments().iter().collect(),
    };
    let mut g = WeightedDigraph::empty(n);
    for seg in active {
        for (i, j, _) in seg.graph.edges() {
            g.weights[(i, j)] = 1.0;
        }
    }
    g
}

#[derive(Serialize, Deserialize)]
struct EdgeWire {
    i: usize,
    j: usize,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct SegmentWire {
    t: f64,
    edges: Vec<EdgeWire>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleWire {
    n: usize,
    segments: Vec<SegmentWire>,
    period: Option<f64>,
    a_low: f64,
    a_high: f64,
}

impl TryFrom<ScheduleWire> for GraphSchedule {
    type Error = Error;

    fn try_from(w: ScheduleWire) -> Result<Self> {
        let segments = w
            .segments
            .into_iter()
            .map(|s| {
                Ok(Segment {
                    start: s.t,
                    graph: WeightedDigraph::from_edges(w.n, s.edges.into_iter().map(|e| (e.i, e.j, e.w)))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GraphSchedule::new(segments, w.period, w.a_low, w.a_high)
    }
}

impl From<GraphSchedule> for ScheduleWire {
    fn from(s: GraphSchedule) -> Self {
        ScheduleWire {
            n: s.n(),
            segments: s
                .segments
                .iter()
                .map(|seg| SegmentWire {
                    t: seg.start,
                    edges: seg.graph.edges().map(|(i, j, w)| EdgeWire { i, j, w }).collect(),
                })
                .collect(),
            period: s.period,
            a_low: s.a_low,
            a_high: s.a_high,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> WeightedDigraph {
        WeightedDigraph::from_edges(n, edges.iter().copied()).unwrap()
    }

    fn line(n: usize) -> WeightedDigraph {
        let mut e = Vec::new();
        for i in 0..n - 1 {
            e.push((i, i + 1, 1.0));
            e.push((i + 1, i, 1.0));
        }
        graph(n, &e)
    }

    /// Pairwise reachability by BFS, used as an oracle.
    fn reach(g: &WeightedDigraph) -> Vec<Vec<bool>> {
        let n = g.n();
        (0..n)
            .map(|s| {
                let mut seen = vec![false; n];
                seen[s] = true;
                let mut q = std::collections::VecDeque::from([s]);
                while let Some(u) = q.pop_front() {
                    for (v, _) in g.out_edges(u) {
                        if !seen[v] {
                            seen[v] = true;
                            q.push_back(v);
                        }
                    }
                }
                seen
            })
            .collect()
    }

    fn slow_chain_graph(n: usize, a: f64, b: f64) -> WeightedDigraph {
        let mut e = Vec::new();
        for i in 0..n - 1 {
            e.push((i, i + 1, a));
        }
        for i in 1..n - 1 {
            e.push((i, 0, b));
        }
        graph(n, &e)
    }

    #[test]
    fn scc_cycle_and_chain() {
        let c = strongly_connected_components(&graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]));
        assert_eq!(c.components, vec![vec![0, 1, 2]]);
        assert!(c.dag.is_empty());

        let c = strongly_connected_components(&graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]));
        assert_eq!(c.components.len(), 3);
        let id = |v: usize| c.component_of[v];
        assert_eq!(
            c.dag,
            BTreeSet::from([(id(0), id(1)), (id(1), id(2))])
        );
    }

    #[test]
    fn scc_slow_chain_matches_reachability() {
        let g = slow_chain_graph(4, 1.0, 2.0);
        let c = strongly_connected_components(&g);
        let r = reach(&g);
        for u in 0..4 {
            for v in 0..4 {
                let same = c.component_of[u] == c.component_of[v];
                assert_eq!(same, r[u][v] && r[v][u], "({u},{v})");
            }
        }
        // agents 1..3 mutually reachable through the b-edges, agent 4 alone
        assert_eq!(c.component_of[0], c.component_of[2]);
        assert_ne!(c.component_of[0], c.component_of[3]);
    }

    #[test]
    fn globally_reachable_examples() {
        assert_eq!(has_globally_reachable_node(&WeightedDigraph::empty(1)), Some(0));
        assert_eq!(has_globally_reachable_node(&WeightedDigraph::empty(2)), None);
        for n in 3..9 {
            assert_eq!(has_globally_reachable_node(&slow_chain_graph(n, 1.0, 1.0)), Some(n - 1));
        }
    }

    #[test]
    fn pairwise_is_stronger_than_weak() {
        // two sources feeding one sink: globally reachable node, not pairwise
        let g = graph(3, &[(0, 2, 1.0), (1, 2, 1.0)]);
        let c = strongly_connected_components(&g);
        assert!(c.is_weakly_connected());
        assert!(!c.is_pairwise_connected());
        assert_eq!(has_globally_reachable_node(&g), Some(2));

        let chain = strongly_connected_components(&graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]));
        assert!(chain.is_pairwise_connected() && chain.is_weakly_connected());
    }

    #[test]
    fn pairwise_implies_weak_on_all_small_graphs() {
        for n in 1..=4usize {
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
            for mask in 0u32..(1 << pairs.len()) {
                let e: Vec<_> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, &(i, j))| (i, j, 1.0))
                    .collect();
                let c = strongly_connected_components(&graph(n, &e));
                if c.is_pairwise_connected() {
                    assert!(c.is_weakly_connected());
                    assert_eq!(c.sinks().len(), 1);
                }
            }
        }
    }

    #[test]
    fn balance_examples() {
        assert!(is_weight_balanced(&line(5), BALANCE_TOL));
        assert!(!is_weight_balanced(&graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]), BALANCE_TOL));
        // directed 3-cycle with equal weights is balanced without symmetry
        assert!(is_weight_balanced(&graph(3, &[(0, 1, 2.0), (1, 2, 2.0), (2, 0, 2.0)]), BALANCE_TOL));
    }

    #[test]
    fn laplacian_examples() {
        assert_eq!(laplacian(&WeightedDigraph::empty(3)), DMatrix::zeros(3, 3));
        let l = laplacian(&graph(2, &[(0, 1, 1.0), (1, 0, 1.0)]));
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let l = laplacian(&line(3));
        assert_eq!(
            l,
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0])
        );
        let l = laplacian(&slow_chain_graph(6, 0.3, 0.7));
        for i in 0..6 {
            assert!(l.row(i).sum().abs() <= 1e-12);
        }
    }

    fn seg(start: f64, g: WeightedDigraph) -> Segment {
        Segment { start, graph: g }
    }

    #[test]
    fn unbounded_graph_examples() {
        let g = graph(3, &[(0, 1, 1.0), (2, 1, 1.0)]);
        let s = GraphSchedule::constant(g.clone(), 1.0, 1.0).unwrap();
        assert_eq!(unbounded_interactions_graph(&s).edge_set(), g.edge_set());

        let e1 = graph(3, &[(0, 1, 1.0)]);
        let e2 = graph(3, &[(1, 2, 1.0), (2, 0, 1.0)]);
        let periodic =
            GraphSchedule::new(vec![seg(0.0, e1.clone()), seg(1.0, e2.clone())], Some(2.0), 1.0, 1.0).unwrap();
        let expected: BTreeSet<_> = e1.edge_set().union(&e2.edge_set()).copied().collect();
        assert_eq!(unbounded_interactions_graph(&periodic).edge_set(), expected);

        let finite =
            GraphSchedule::new(vec![seg(0.0, e1), seg(5.0, WeightedDigraph::empty(3))], None, 1.0, 1.0).unwrap();
        assert!(unbounded_interactions_graph(&finite).edge_set().is_empty());
    }

    #[test]
    fn adding_a_segment_keeps_periodic_edges() {
        let e1 = graph(3, &[(0, 1, 1.0)]);
        let e2 = graph(3, &[(1, 2, 1.0)]);
        let before = GraphSchedule::new(vec![seg(0.0, e1.clone())], Some(2.0), 1.0, 1.0).unwrap();
        let after = GraphSchedule::new(vec![seg(0.0, e1), seg(1.0, e2)], Some(2.0), 1.0, 1.0).unwrap();
        assert!(unbounded_interactions_graph(&before)
            .edge_set()
            .is_subset(&unbounded_interactions_graph(&after).edge_set()));
    }

    #[test]
    fn schedule_validation() {
        let g = line(3);
        assert!(GraphSchedule::new(vec![seg(1.0, g.clone())], None, 1.0, 1.0).is_err());
        assert!(GraphSchedule::new(vec![seg(0.0, g.clone()), seg(0.0, g.clone())], None, 1.0, 1.0).is_err());
        assert!(GraphSchedule::new(vec![seg(0.0, g.clone())], None, 2.0, 3.0).is_err());
        assert!(GraphSchedule::new(vec![seg(0.0, g.clone()), seg(1.0, line(4))], None, 1.0, 1.0).is_err());
        assert!(GraphSchedule::new(vec![seg(0.0, g.clone()), seg(3.0, g.clone())], Some(2.0), 1.0, 1.0).is_err());
        assert!(WeightedDigraph::from_edges(2, [(0, 0, 1.0)]).is_err());
        assert!(WeightedDigraph::from_edges(2, [(0, 1, 1.0), (0, 1, 1.0)]).is_err());
    }

    #[test]
    fn cursor_and_switches() {
        let e1 = graph(2, &[(0, 1, 1.0)]);
        let e2 = graph(2, &[(1, 0, 1.0)]);
        let s = GraphSchedule::new(vec![seg(0.0, e1.clone()), seg(0.75, e2.clone())], Some(1.5), 1.0, 1.0)
            .unwrap();
        assert_eq!(s.cursor_at(0.0), ScheduleCursor { cycle: 0, index: 0 });
        assert_eq!(s.cursor_at(0.75), ScheduleCursor { cycle: 0, index: 1 });
        assert_eq!(s.cursor_at(3.8), ScheduleCursor { cycle: 2, index: 1 });
        assert_eq!(s.graph_at(3.8), &e2);
        let c = ScheduleCursor { cycle: 2, index: 1 };
        assert_eq!(s.next_switch(c), Some((4.5, ScheduleCursor { cycle: 3, index: 0 })));
        assert!(!s.is_static_from(c));
        assert!(!s.has_time_invariant_topology());

        let f = GraphSchedule::new(vec![seg(0.0, e1), seg(2.0, e2)], None, 1.0, 1.0).unwrap();
        assert_eq!(f.next_switch(ScheduleCursor::default()).unwrap().0, 2.0);
        assert!(f.is_static_from(f.cursor_at(10.0)));
    }

    #[test]
    fn schedule_json_round_trip() {
        let text = r#"{"n":3,"segments":[{"t":0,"edges":[{"i":0,"j":1,"w":1.0}]},
            {"t":1,"edges":[{"i":1,"j":2,"w":0.5}]}],"period":2.0,"a_low":0.5,"a_high":1.0}"#;
        let s: GraphSchedule = serde_json::from_str(text).unwrap();
        assert_eq!(s.segments().len(), 2);
        assert_eq!(s.graph_at(1.5).weight(1, 2), 0.5);
        let back: GraphSchedule = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"n":2,"segments":[{"t":0,"edges":[{"i":0,"j":1,"w":3.0}]}],"period":null,"a_low":0.5,"a_high":1.0}"#;
        assert!(serde_json::from_str::<GraphSchedule>(bad).is_err());
    }
}
