//! Exclusive channel counting.
//!
//! A realization supports as many exclusive channels between two node sets as
//! there are bond-disjoint open paths between them. Intermediate nodes may be
//! shared: a swapping node consumes bonds, not its own capacity. The count is
//! an integral maximum flow where edge `e` carries up to `open_copies(e)`
//! units in either direction (an undirected edge is a pair of antiparallel
//! arcs sharing capacity). Source and sink sets behave as if attached to a
//! virtual super-terminal with unbounded arcs.
//!
//! [`FlowSolver`] augments one unit at a time along paths found by a
//! bidirectional breadth-first search that always grows the smaller frontier.
//! Flows in this problem are small (at most the terminals' degree) and the
//! limiting cut usually sits next to one terminal, so the terminating search
//! exhausts a small local region instead of the whole cluster. Capacities are
//! pulled lazily from a [`CapacityOracle`], so only bonds the search touches
//! are ever sampled.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::LatticeGraph;
use crate::percolation::{PercolationSample, TrialDraw};

const NONE: u32 = u32::MAX;
/// Sink sets at least this large are first probed depth-first.
const DEPTH_FIRST_MIN_SINKS: usize = 16;

/// Supplies the open copy count of an edge on first use.
pub trait CapacityOracle {
    fn capacity(&self, edge: u32, mult: u8) -> u8;
}

impl CapacityOracle for [u8] {
    #[inline]
    fn capacity(&self, edge: u32, _mult: u8) -> u8 {
        self[edge as usize]
    }
}

impl CapacityOracle for Vec<u8> {
    #[inline]
    fn capacity(&self, edge: u32, _mult: u8) -> u8 {
        self[edge as usize]
    }
}

impl CapacityOracle for TrialDraw<'_> {
    #[inline]
    fn capacity(&self, edge: u32, mult: u8) -> u8 {
        self.open_copies(edge, mult)
    }
}

/// Number of exclusive channels in one realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelCount(pub u32);

/// Sources, sinks and per-edge capacities on a lattice patch.
#[derive(Clone, Debug)]
pub struct FlowProblem<'g> {
    graph: &'g LatticeGraph,
    capacities: Vec<u8>,
    sources: Vec<u32>,
    sinks: Vec<u32>,
}

impl<'g> FlowProblem<'g> {
    pub fn new(
        graph: &'g LatticeGraph,
        capacities: Vec<u8>,
        sources: &[usize],
        sinks: &[usize],
    ) -> Result<Self> {
        if capacities.len() != graph.edge_count() {
            return Err(Error::InvalidProblem(alloc::format!(
                "{} capacities for {} edges",
                capacities.len(),
                graph.edge_count()
            )));
        }
        for (e, &c) in graph.edges().iter().zip(&capacities) {
            if c > e.mult {
                return Err(Error::InvalidProblem(alloc::format!(
                    "capacity {c} exceeds multiplicity {}",
                    e.mult
                )));
            }
        }
        let sources = terminal_set(graph, sources, "source")?;
        let sinks = terminal_set(graph, sinks, "sink")?;
        if sources.iter().any(|s| sinks.contains(s)) {
            return Err(Error::InvalidProblem("sources and sinks overlap".into()));
        }
        Ok(FlowProblem {
            graph,
            capacities,
            sources,
            sinks,
        })
    }

    pub fn from_sample(
        graph: &'g LatticeGraph,
        sample: &PercolationSample,
        sources: &[usize],
        sinks: &[usize],
    ) -> Result<Self> {
        Self::new(graph, sample.open_capacity.clone(), sources, sinks)
    }

    pub fn graph(&self) -> &'g LatticeGraph {
        self.graph
    }

    pub fn capacities(&self) -> &[u8] {
        &self.capacities
    }

    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.sources.iter().map(|&s| s as usize)
    }

    pub fn sinks(&self) -> impl Iterator<Item = usize> + '_ {
        self.sinks.iter().map(|&s| s as usize)
    }

    /// Same problem with the roles of the terminal sets exchanged.
    pub fn reversed(&self) -> Self {
        FlowProblem {
            graph: self.graph,
            capacities: self.capacities.clone(),
            sources: self.sinks.clone(),
            sinks: self.sources.clone(),
        }
    }

    fn solve(&self) -> (FlowSolver, u32) {
        let mut solver = FlowSolver::new(self.graph);
        let value = solver.max_flow(
            self.graph,
            self.capacities.as_slice(),
            &self.sources,
            &self.sinks,
        );
        (solver, value)
    }
}

fn terminal_set(graph: &LatticeGraph, nodes: &[usize], what: &str) -> Result<Vec<u32>> {
    if nodes.is_empty() {
        return Err(Error::InvalidProblem(alloc::format!("empty {what} set")));
    }
    let mut out: Vec<u32> = Vec::with_capacity(nodes.len());
    for &n in nodes {
        if n >= graph.node_count() {
            return Err(Error::InvalidProblem(alloc::format!(
                "{what} {n} is not a node"
            )));
        }
        if !out.contains(&(n as u32)) {
            out.push(n as u32);
        }
    }
    Ok(out)
}

/// Terminals to the patch rim, which stands in for the network at infinity.
pub fn to_infinity_problem<'g>(
    graph: &'g LatticeGraph,
    sample: &PercolationSample,
    terminals: &[usize],
) -> Result<FlowProblem<'g>> {
    for &t in terminals {
        if t < graph.node_count() && graph.is_boundary(t) {
            return Err(Error::TooCloseToRim {
                node: t,
                distance: 0,
                required: 1,
            });
        }
    }
    FlowProblem::from_sample(graph, sample, terminals, &graph.boundary_nodes())
}

/// Maximum number of bond-disjoint open source-sink paths.
pub fn max_channels(problem: &FlowProblem<'_>) -> ChannelCount {
    ChannelCount(problem.solve().1)
}

/// Edge ids of a minimum cut; their capacities sum to the channel count.
pub fn min_cut(problem: &FlowProblem<'_>) -> Vec<usize> {
    let (mut solver, _) = problem.solve();
    let graph = problem.graph;
    let reach = solver.residual_reachable(graph, problem.capacities.as_slice(), &problem.sources);
    graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(id, e)| reach[e.u as usize] != reach[e.v as usize] && problem.capacities[*id] > 0)
        .map(|(id, _)| id)
        .collect()
}

/// One channel of a flow decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelPath {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

/// Splits a maximum flow into explicit source-to-sink channels.
pub fn decompose_paths(problem: &FlowProblem<'_>) -> Vec<ChannelPath> {
    let (solver, value) = problem.solve();
    let graph = problem.graph;
    let mut flow: Vec<i32> = (0..graph.edge_count())
        .map(|e| solver.edge_flow(e))
        .collect();
    let is_sink = {
        let mut v = vec![false; graph.node_count()];
        for &t in &problem.sinks {
            v[t as usize] = true;
        }
        v
    };
    // outgoing flow of x along e
    let out = |flow: &[i32], x: u32, e: u32| -> i32 {
        let f = flow[e as usize];
        if graph.edge(e as usize).u == x {
            f
        } else {
            -f
        }
    };
    let mut paths = Vec::with_capacity(value as usize);
    for &s in &problem.sources {
        loop {
            let first = graph
                .adjacency()
                .neighbors(s)
                .iter()
                .find(|&&(_, e)| out(&flow, s, e) > 0);
            if first.is_none() {
                break;
            }
            let mut nodes = vec![s as usize];
            let mut edges: Vec<usize> = Vec::new();
            let mut x = s;
            while !is_sink[x as usize] {
                let &(y, e) = graph
                    .adjacency()
                    .neighbors(x)
                    .iter()
                    .find(|&&(_, e)| out(&flow, x, e) > 0)
                    .expect("flow conservation");
                flow[e as usize] += if graph.edge(e as usize).u == x { -1 } else { 1 };
                // a revisit closes a circulation: drop it from the path
                if let Some(pos) = nodes.iter().position(|&n| n == y as usize) {
                    nodes.truncate(pos + 1);
                    edges.truncate(pos);
                } else {
                    nodes.push(y as usize);
                    edges.push(e as usize);
                }
                x = y;
            }
            paths.push(ChannelPath { nodes, edges });
        }
    }
    paths
}

/// Reusable max-flow workspace sized for one graph.
///
/// Edge state is tagged with the epoch of the solve that last touched it, so a
/// new solve costs nothing for edges it never reaches.
#[derive(Clone, Debug)]
pub struct FlowSolver {
    edge_epoch: Vec<u32>,
    cap: Vec<u8>,
    flow: Vec<i8>,
    fwd_mark: Vec<u32>,
    bwd_mark: Vec<u32>,
    fwd_parent: Vec<u32>,
    bwd_parent: Vec<u32>,
    solve_epoch: u32,
    search_epoch: u32,
    frontier_a: Vec<u32>,
    frontier_b: Vec<u32>,
    next: Vec<u32>,
}

enum Search {
    Meet(u32),
    Exhausted,
}

impl FlowSolver {
    pub fn new(graph: &LatticeGraph) -> Self {
        let (n, m) = (graph.node_count(), graph.edge_count());
        FlowSolver {
            edge_epoch: vec![0; m],
            cap: vec![0; m],
            flow: vec![0; m],
            fwd_mark: vec![0; n],
            bwd_mark: vec![0; n],
            fwd_parent: vec![NONE; n],
            bwd_parent: vec![NONE; n],
            solve_epoch: 0,
            search_epoch: 0,
            frontier_a: Vec::new(),
            frontier_b: Vec::new(),
            next: Vec::new(),
        }
    }

    /// Maximum flow value; terminal sets must be disjoint.
    pub fn max_flow<C: CapacityOracle + ?Sized>(
        &mut self,
        graph: &LatticeGraph,
        caps: &C,
        sources: &[u32],
        sinks: &[u32],
    ) -> u32 {
        debug_assert_eq!(self.cap.len(), graph.edge_count());
        if self.solve_epoch == u32::MAX {
            self.edge_epoch.fill(0);
            self.solve_epoch = 0;
        }
        self.solve_epoch += 1;
        // depth-first probes reach a large rim far cheaper than level sweeps
        let probe = sinks.len() >= DEPTH_FIRST_MIN_SINKS;
        let budget = graph.node_count() / 4;
        let mut value = 0;
        loop {
            let found = match probe.then(|| self.probe(graph, caps, sources, sinks, budget)) {
                Some(Some(found)) => found,
                _ => self.search(graph, caps, sources, sinks),
            };
            match found {
                Search::Meet(m) => self.augment(graph, m),
                Search::Exhausted => return value,
            }
            value += 1;
        }
    }

    /// Signed flow on `edge` from the last solve, positive along `u -> v`.
    pub fn edge_flow(&self, edge: usize) -> i32 {
        if self.edge_epoch[edge] == self.solve_epoch {
            i32::from(self.flow[edge])
        } else {
            0
        }
    }

    #[inline]
    fn touch<C: CapacityOracle + ?Sized>(&mut self, graph: &LatticeGraph, caps: &C, e: u32) {
        let i = e as usize;
        if self.edge_epoch[i] != self.solve_epoch {
            self.edge_epoch[i] = self.solve_epoch;
            self.cap[i] = caps.capacity(e, graph.edge(i).mult);
            self.flow[i] = 0;
        }
    }

    /// Residual capacity of `x -> other` along `e` (edge must be touched).
    #[inline]
    fn residual(&self, graph: &LatticeGraph, x: u32, e: u32) -> i32 {
        let i = e as usize;
        let f = i32::from(self.flow[i]);
        let along = if graph.edge(i).u == x { f } else { -f };
        i32::from(self.cap[i]) - along
    }

    fn next_search_epoch(&mut self) {
        if self.search_epoch == u32::MAX {
            self.fwd_mark.fill(0);
            self.bwd_mark.fill(0);
            self.search_epoch = 0;
        }
        self.search_epoch += 1;
    }

    fn mark_terminals(&mut self, sources: &[u32], sinks: &[u32]) {
        let epoch = self.search_epoch;
        for &s in sources {
            self.fwd_mark[s as usize] = epoch;
            self.fwd_parent[s as usize] = NONE;
        }
        for &t in sinks {
            self.bwd_mark[t as usize] = epoch;
            self.bwd_parent[t as usize] = NONE;
        }
    }

    /// Depth-first search from the sources; `None` once more than `budget`
    /// nodes were reached without a verdict.
    fn probe<C: CapacityOracle + ?Sized>(
        &mut self,
        graph: &LatticeGraph,
        caps: &C,
        sources: &[u32],
        sinks: &[u32],
        budget: usize,
    ) -> Option<Search> {
        self.next_search_epoch();
        self.mark_terminals(sources, sinks);
        let epoch = self.search_epoch;
        let mut stack = core::mem::take(&mut self.next);
        stack.clear();
        stack.extend_from_slice(sources);
        let adjacency = graph.adjacency();
        let mut reached = 0;
        let result = 'outer: loop {
            let Some(x) = stack.pop() else {
                break Some(Search::Exhausted);
            };
            for &(y, e) in adjacency.neighbors(x) {
                if self.fwd_mark[y as usize] == epoch {
                    continue;
                }
                self.touch(graph, caps, e);
                if self.residual(graph, x, e) <= 0 {
                    continue;
                }
                self.fwd_mark[y as usize] = epoch;
                self.fwd_parent[y as usize] = e;
                if self.bwd_mark[y as usize] == epoch {
                    break 'outer Some(Search::Meet(y));
                }
                stack.push(y);
                reached += 1;
            }
            if reached > budget {
                break None;
            }
        };
        self.next = stack;
        result
    }

    fn search<C: CapacityOracle + ?Sized>(
        &mut self,
        graph: &LatticeGraph,
        caps: &C,
        sources: &[u32],
        sinks: &[u32],
    ) -> Search {
        self.next_search_epoch();
        let epoch = self.search_epoch;
        let mut fwd = core::mem::take(&mut self.frontier_a);
        let mut bwd = core::mem::take(&mut self.frontier_b);
        let mut next = core::mem::take(&mut self.next);
        fwd.clear();
        bwd.clear();
        fwd.extend_from_slice(sources);
        bwd.extend_from_slice(sinks);
        self.mark_terminals(sources, sinks);
        let adjacency = graph.adjacency();
        let result = 'outer: loop {
            if fwd.is_empty() || bwd.is_empty() {
                break Search::Exhausted;
            }
            next.clear();
            if fwd.len() <= bwd.len() {
                for &x in &fwd {
                    for &(y, e) in adjacency.neighbors(x) {
                        if self.fwd_mark[y as usize] == epoch {
                            continue;
                        }
                        self.touch(graph, caps, e);
                        if self.residual(graph, x, e) <= 0 {
                            continue;
                        }
                        self.fwd_mark[y as usize] = epoch;
                        self.fwd_parent[y as usize] = e;
                        if self.bwd_mark[y as usize] == epoch {
                            break 'outer Search::Meet(y);
                        }
                        next.push(y);
                    }
                }
                core::mem::swap(&mut fwd, &mut next);
            } else {
                for &y in &bwd {
                    for &(x, e) in adjacency.neighbors(y) {
                        if self.bwd_mark[x as usize] == epoch {
                            continue;
                        }
                        self.touch(graph, caps, e);
                        if self.residual(graph, x, e) <= 0 {
                            continue;
                        }
                        self.bwd_mark[x as usize] = epoch;
                        self.bwd_parent[x as usize] = e;
                        if self.fwd_mark[x as usize] == epoch {
                            break 'outer Search::Meet(x);
                        }
                        next.push(x);
                    }
                }
                core::mem::swap(&mut bwd, &mut next);
            }
        };
        self.frontier_a = fwd;
        self.frontier_b = bwd;
        self.next = next;
        result
    }

    #[inline]
    fn push_unit(&mut self, graph: &LatticeGraph, from: u32, e: u32) {
        let i = e as usize;
        if graph.edge(i).u == from {
            self.flow[i] += 1;
        } else {
            self.flow[i] -= 1;
        }
    }

    fn augment(&mut self, graph: &LatticeGraph, meet: u32) {
        let mut y = meet;
        while self.fwd_parent[y as usize] != NONE {
            let e = self.fwd_parent[y as usize];
            let x = graph.edge(e as usize).other(y);
            self.push_unit(graph, x, e);
            y = x;
        }
        let mut x = meet;
        while self.bwd_parent[x as usize] != NONE {
            let e = self.bwd_parent[x as usize];
            self.push_unit(graph, x, e);
            x = graph.edge(e as usize).other(x);
        }
    }

    /// Nodes reachable from `sources` in the residual network of the last
    /// solve (the source side of a minimum cut).
    pub fn residual_reachable<C: CapacityOracle + ?Sized>(
        &mut self,
        graph: &LatticeGraph,
        caps: &C,
        sources: &[u32],
    ) -> Vec<bool> {
        let mut seen = vec![false; graph.node_count()];
        let mut stack: Vec<u32> = sources.to_vec();
        for &s in sources {
            seen[s as usize] = true;
        }
        while let Some(x) = stack.pop() {
            for &(y, e) in graph.adjacency().neighbors(x) {
                if seen[y as usize] {
                    continue;
                }
                self.touch(graph, caps, e);
                if self.residual(graph, x, e) > 0 {
                    seen[y as usize] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }
}
