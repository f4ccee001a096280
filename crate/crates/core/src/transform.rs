//! Lattice transformations by entanglement swapping and the EQC of the
//! transformed network, normalized by the bond resources of the original one.
//!
//! Honeycomb sites are triangle-lattice offsets `(i, j)` with
//! `(i + j) mod 3 != 2`; class 0 sites are the A sublattice. An A site at
//! `(i, j)` maps to the target offset `((i + j) / 3, (2j - i) / 3)`, which is
//! a lattice isomorphism from the A sublattice onto the triangle lattice and
//! from the merged A-B pairs of the third-doubled honeycomb onto the square
//! lattice.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::lattice::{Edge, LatticeGraph, LatticeKind};
use crate::monte_carlo::{
    EqcEstimate, EqcProblem, Executor, Network, ScenarioMode, ScenarioSpec, Terminals,
};
use crate::percolation::{BondProbabilities, Thresholds};
use crate::rng;

const TAG_CROSSOVER: u32 = 4;

/// `2 - sqrt(2)`: the per-copy probability at which a double bond converts
/// jointly with certainty.
pub const JOINT_SATURATION: f64 = 0.585_786_437_626_904_9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// Double-bond honeycomb, each double bond converted jointly into one
    /// bond with probability [`joint_double_bond_scp`].
    DoubleHexJoint,
    /// Swapping at every B site turns the double-bond honeycomb into a
    /// single-bond triangle lattice on the A sites.
    DoubleHexToTriangle,
    /// The two copies of every bond used as two independent single-bond
    /// honeycombs.
    DoubleHexSeparate,
    /// Merging the endpoints of every double bond turns the third-doubled
    /// honeycomb into a single-bond square lattice.
    ThirdDoubleHexToSquare,
    /// Third-doubled honeycomb with each double bond converted jointly.
    ThirdDoubleHexJoint,
    /// Third-doubled honeycomb with double bonds kept as two single bonds.
    ThirdDoubleHexSeparate,
}

impl TransformKind {
    pub const ALL: [TransformKind; 6] = [
        TransformKind::DoubleHexJoint,
        TransformKind::DoubleHexToTriangle,
        TransformKind::DoubleHexSeparate,
        TransformKind::ThirdDoubleHexToSquare,
        TransformKind::ThirdDoubleHexJoint,
        TransformKind::ThirdDoubleHexSeparate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::DoubleHexJoint => "dhex-joint",
            TransformKind::DoubleHexToTriangle => "dhex2tri",
            TransformKind::DoubleHexSeparate => "dhex-separate",
            TransformKind::ThirdDoubleHexToSquare => "tdhex2sq",
            TransformKind::ThirdDoubleHexJoint => "tdhex-joint",
            TransformKind::ThirdDoubleHexSeparate => "tdhex-separate",
        }
    }

    pub fn source_kind(self) -> LatticeKind {
        match self {
            TransformKind::DoubleHexJoint
            | TransformKind::DoubleHexToTriangle
            | TransformKind::DoubleHexSeparate => LatticeKind::HexagonDoubleBond,
            _ => LatticeKind::HexagonThirdDoubleBond,
        }
    }

    /// Untransformed use of the same source lattice that a swapping
    /// transform is compared against.
    pub fn baseline(self) -> TransformKind {
        match self.source_kind() {
            LatticeKind::HexagonDoubleBond => TransformKind::DoubleHexJoint,
            _ => TransformKind::ThirdDoubleHexJoint,
        }
    }
}

impl core::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidScenario(alloc::format!("unknown transform {s:?}")))
    }
}

/// Per-copy probability `p` to joint probability `2(1 - (1 - p/2)^2)`;
/// defined on `[0, 2 - sqrt(2)]` where the result is at most 1.
pub fn scp_forward(p: f64) -> Result<f64> {
    if !(0.0..=JOINT_SATURATION + 1e-15).contains(&p) {
        return Err(Error::OutOfDomain {
            value: p,
            lo: 0.0,
            hi: JOINT_SATURATION,
        });
    }
    let q = 1.0 - 0.5 * p;
    Ok((2.0 * (1.0 - q * q)).min(1.0))
}

/// Inverse of [`scp_forward`] on `[0, 1]`.
pub fn scp_inverse(p_joint: f64) -> Result<f64> {
    check_probability(p_joint).map_err(|_| Error::OutOfDomain {
        value: p_joint,
        lo: 0.0,
        hi: 1.0,
    })?;
    Ok(2.0 * (1.0 - libm::sqrt(1.0 - 0.5 * p_joint)))
}

/// Joint conversion probability of a double bond with per-copy probability
/// `p`; saturates at 1 from `p = 2 - sqrt(2)` on.
pub fn joint_double_bond_scp(p: f64) -> Result<f64> {
    check_probability(p)?;
    if p >= JOINT_SATURATION {
        Ok(1.0)
    } else {
        scp_forward(p)
    }
}

/// Both directions of the per-copy / joint probability relation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScpMapping;

impl ScpMapping {
    pub fn forward(self, p: f64) -> Result<f64> {
        scp_forward(p)
    }

    pub fn inverse(self, p_joint: f64) -> Result<f64> {
        scp_inverse(p_joint)
    }
}

/// How the bond probability of a transformed network derives from the
/// per-copy probability of the source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BondRule {
    /// Every copy keeps probability `p`.
    Copy,
    /// Edges flagged `true` were double bonds and use the joint probability.
    JointWhere(Vec<bool>),
}

/// A transformed network ready for sampling.
#[derive(Clone, Debug)]
pub struct Transformed {
    pub kind: TransformKind,
    pub graph: LatticeGraph,
    /// Target node of every source node; `None` for nodes consumed by
    /// swapping.
    pub node_map: Vec<Option<usize>>,
    /// Independent single-bond layers the copies are split into.
    pub layers: u8,
    pub rule: BondRule,
}

impl Transformed {
    pub fn network(&self, p: f64) -> Result<Network<'_>> {
        let thresholds = match &self.rule {
            BondRule::Copy => Thresholds::uniform(p)?,
            BondRule::JointWhere(flags) => {
                let joint = joint_double_bond_scp(p)?;
                BondProbabilities::PerEdge(
                    flags.iter().map(|&f| if f { joint } else { p }).collect(),
                )
                .compile()?
            }
        };
        Network::new(&self.graph, thresholds, self.layers)
    }

    /// The layers as stand-alone graphs.
    pub fn layer_graphs(&self) -> Vec<LatticeGraph> {
        (0..self.layers).map(|_| self.graph.clone()).collect()
    }

    /// Carries source terminals over to the target graph. Explicit parties
    /// must survive the transform; rim sinks are recomputed on the target.
    /// The normalizer stays that of the source.
    pub fn map_terminals(&self, source: &Terminals, scenario: &ScenarioSpec) -> Result<Terminals> {
        let map = |nodes: &[usize]| -> Result<Vec<usize>> {
            let mut out: Vec<usize> = nodes
                .iter()
                .map(|&n| {
                    self.node_map.get(n).copied().flatten().ok_or_else(|| {
                        Error::InvalidScenario(alloc::format!(
                            "terminal {n} does not survive {}",
                            self.kind
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            out.sort_unstable();
            out.dedup();
            Ok(out)
        };
        let sources = map(&source.sources)?;
        let sinks = match scenario.mode {
            ScenarioMode::ToInfinity => self.graph.boundary_nodes(),
            _ => map(&source.sinks)?,
        };
        Terminals::custom(&self.graph, sources, sinks, source.normalizer)
    }
}

fn check_source(graph: &LatticeGraph, kind: TransformKind) -> Result<()> {
    if graph.kind() != kind.source_kind() {
        return Err(Error::KindMismatch {
            transform: kind.name(),
            expected: kind.source_kind().name(),
            found: graph.kind().name(),
        });
    }
    Ok(())
}

fn sublattice(offset: [i64; 2]) -> i64 {
    (offset[0] + offset[1]).rem_euclid(3)
}

fn contract(o: [i64; 2]) -> [i64; 2] {
    debug_assert_eq!(sublattice(o), 0);
    [(o[0] + o[1]) / 3, (2 * o[1] - o[0]) / 3]
}

fn single_bonds(graph: &LatticeGraph, kind: LatticeKind) -> Result<LatticeGraph> {
    let offsets = (0..graph.node_count()).map(|n| graph.offset(n)).collect();
    let edges = graph
        .edges()
        .iter()
        .map(|e| Edge { mult: 1, ..*e })
        .collect();
    LatticeGraph::from_parts(kind, graph.extent(), offsets, edges)
}

fn identity_map(graph: &LatticeGraph) -> Vec<Option<usize>> {
    (0..graph.node_count()).map(Some).collect()
}

/// Applies `kind` to a source patch of the matching lattice kind.
pub fn transform_graph(graph: &LatticeGraph, kind: TransformKind) -> Result<Transformed> {
    check_source(graph, kind)?;
    let copy = |graph: LatticeGraph, node_map, layers, rule| {
        Ok(Transformed {
            kind,
            graph,
            node_map,
            layers,
            rule,
        })
    };
    match kind {
        TransformKind::DoubleHexJoint | TransformKind::ThirdDoubleHexJoint => {
            let flags = graph.edges().iter().map(|e| e.mult == 2).collect();
            copy(
                single_bonds(graph, LatticeKind::Hexagon)?,
                identity_map(graph),
                1,
                BondRule::JointWhere(flags),
            )
        }
        TransformKind::DoubleHexSeparate => copy(
            single_bonds(graph, LatticeKind::Hexagon)?,
            identity_map(graph),
            2,
            BondRule::Copy,
        ),
        TransformKind::ThirdDoubleHexSeparate => {
            copy(graph.clone(), identity_map(graph), 1, BondRule::Copy)
        }
        TransformKind::DoubleHexToTriangle => to_triangle(graph),
        TransformKind::ThirdDoubleHexToSquare => to_square(graph),
    }
}

fn to_triangle(graph: &LatticeGraph) -> Result<Transformed> {
    let mut node_map = alloc::vec![None; graph.node_count()];
    let mut offsets = Vec::new();
    for (n, slot) in node_map.iter_mut().enumerate() {
        if sublattice(graph.offset(n)) == 0 {
            *slot = Some(offsets.len());
            offsets.push(contract(graph.offset(n)));
        }
    }
    // each B site joins every pair of its A neighbors
    let mut edges = Vec::new();
    for n in (0..graph.node_count()).filter(|&n| node_map[n].is_none()) {
        let nbrs: Vec<usize> = graph
            .adjacency()
            .neighbors(n as u32)
            .iter()
            .filter_map(|&(m, _)| node_map[m as usize])
            .collect();
        for (a, &x) in nbrs.iter().enumerate() {
            for &y in &nbrs[a + 1..] {
                edges.push(Edge {
                    u: x.min(y) as u32,
                    v: x.max(y) as u32,
                    mult: 1,
                });
            }
        }
    }
    edges.sort_unstable_by_key(|e| (e.u, e.v));
    let target = LatticeGraph::from_parts(LatticeKind::Triangle, graph.extent(), offsets, edges)?;
    Ok(Transformed {
        kind: TransformKind::DoubleHexToTriangle,
        graph: target,
        node_map,
        layers: 1,
        rule: BondRule::Copy,
    })
}

fn to_square(graph: &LatticeGraph) -> Result<Transformed> {
    // a B site merges into its double-bond partner at B - (1, 0)
    let representative = |o: [i64; 2]| {
        if sublattice(o) == 0 {
            o
        } else {
            [o[0] - 1, o[1]]
        }
    };
    let mut index: BTreeMap<[i64; 2], usize> = BTreeMap::new();
    let mut offsets = Vec::new();
    let mut node_map = Vec::with_capacity(graph.node_count());
    for n in 0..graph.node_count() {
        let target = contract(representative(graph.offset(n)));
        let id = *index.entry(target).or_insert_with(|| {
            offsets.push(target);
            offsets.len() - 1
        });
        node_map.push(Some(id));
    }
    let mut edges: Vec<Edge> = graph
        .edges()
        .iter()
        .filter(|e| e.mult == 1)
        .map(|e| {
            let (x, y) = (
                node_map[e.u as usize].unwrap_or(0),
                node_map[e.v as usize].unwrap_or(0),
            );
            Edge {
                u: x.min(y) as u32,
                v: x.max(y) as u32,
                mult: 1,
            }
        })
        .collect();
    edges.sort_unstable_by_key(|e| (e.u, e.v));
    let target = LatticeGraph::from_parts(LatticeKind::Square, graph.extent(), offsets, edges)?;
    Ok(Transformed {
        kind: TransformKind::ThirdDoubleHexToSquare,
        graph: target,
        node_map,
        layers: 1,
        rule: BondRule::Copy,
    })
}

/// EQC of a transformed network: channels of the new network over the
/// bond resources of the original terminals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformedEqc {
    pub kind: TransformKind,
    pub p: f64,
    pub estimate: EqcEstimate,
}

impl TransformedEqc {
    pub fn value(&self) -> f64 {
        self.estimate.mean
    }
}

struct Prepared {
    transformed: Transformed,
    terminals: Terminals,
}

fn prepare(
    source: &LatticeGraph,
    kind: TransformKind,
    scenario: &ScenarioSpec,
) -> Result<Prepared> {
    let transformed = transform_graph(source, kind)?;
    let source_terminals = Terminals::place(source, scenario)?;
    let terminals = transformed.map_terminals(&source_terminals, scenario)?;
    Ok(Prepared {
        transformed,
        terminals,
    })
}

fn counts<E: Executor>(
    exec: &E,
    prepared: &Prepared,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<u32>> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let problem = EqcProblem::new(prepared.transformed.network(p)?, &prepared.terminals, seed);
    Ok(exec.run(&problem, trials))
}

pub fn transformed_eqc<E: Executor>(
    exec: &E,
    source: &LatticeGraph,
    kind: TransformKind,
    scenario: &ScenarioSpec,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<TransformedEqc> {
    let prepared = prepare(source, kind, scenario)?;
    let c = counts(exec, &prepared, p, trials, seed)?;
    Ok(TransformedEqc {
        kind,
        p,
        estimate: EqcEstimate::from_counts(&c, prepared.terminals.normalizer),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPoint {
    pub p: f64,
    pub original: EqcEstimate,
    pub transformed: EqcEstimate,
    /// `transformed - original`.
    pub diff: f64,
    /// Standard error of the paired per-trial difference.
    pub diff_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverScan {
    pub original: TransformKind,
    pub transformed: TransformKind,
    pub points: Vec<CrossoverPoint>,
    /// Consecutive grid points between which the difference changes sign.
    pub brackets: Vec<(f64, f64)>,
}

/// How crossover grid values are read for the original curve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityAxis {
    /// Both curves at the per-copy probability `p`.
    #[default]
    PerCopy,
    /// Grid values are the joint double-bond probability `p'`; the original
    /// (a joint double-bond network) is evaluated at `p = scp_inverse(p')`.
    Joint,
}

impl ProbabilityAxis {
    pub fn name(self) -> &'static str {
        match self {
            ProbabilityAxis::PerCopy => "per-copy",
            ProbabilityAxis::Joint => "joint",
        }
    }
}

impl core::fmt::Display for ProbabilityAxis {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for ProbabilityAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-copy" | "p" => Ok(ProbabilityAxis::PerCopy),
            "joint" | "p'" => Ok(ProbabilityAxis::Joint),
            _ => Err(Error::InvalidScenario(alloc::format!(
                "unknown probability axis {s:?}"
            ))),
        }
    }
}

/// Paired EQC curves of two uses of one source lattice. Both curves share
/// the seed of each grid point.
#[allow(clippy::too_many_arguments)]
pub fn crossover_scan<E: Executor>(
    exec: &E,
    source: &LatticeGraph,
    original: TransformKind,
    transformed: TransformKind,
    scenario: &ScenarioSpec,
    p_grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<CrossoverScan> {
    crossover_scan_on(
        exec,
        source,
        original,
        transformed,
        scenario,
        ProbabilityAxis::PerCopy,
        p_grid,
        trials,
        seed,
    )
}

/// [`crossover_scan`] with an explicit reading of the grid for the original
/// curve. [`ProbabilityAxis::Joint`] needs the original to be
/// [`TransformKind::DoubleHexJoint`].
#[allow(clippy::too_many_arguments)]
pub fn crossover_scan_on<E: Executor>(
    exec: &E,
    source: &LatticeGraph,
    original: TransformKind,
    transformed: TransformKind,
    scenario: &ScenarioSpec,
    axis: ProbabilityAxis,
    grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<CrossoverScan> {
    grid.iter().try_for_each(|&p| check_probability(p))?;
    if axis == ProbabilityAxis::Joint && original != TransformKind::DoubleHexJoint {
        return Err(Error::InvalidScenario(alloc::format!(
            "the joint axis applies to {}, not {original}",
            TransformKind::DoubleHexJoint
        )));
    }
    let a = prepare(source, original, scenario)?;
    let b = prepare(source, transformed, scenario)?;
    let mut points = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        let s = rng::derive_seed(seed, TAG_CROSSOVER, i as u64);
        let p_original = match axis {
            ProbabilityAxis::PerCopy => x,
            ProbabilityAxis::Joint => scp_inverse(x)?,
        };
        let ca = counts(exec, &a, p_original, trials, s)?;
        let cb = counts(exec, &b, x, trials, s)?;
        let (na, nb) = (a.terminals.normalizer, b.terminals.normalizer);
        let (diff, diff_stderr) = paired_difference(&ca, na, &cb, nb);
        points.push(CrossoverPoint {
            p: x,
            original: EqcEstimate::from_counts(&ca, na),
            transformed: EqcEstimate::from_counts(&cb, nb),
            diff,
            diff_stderr,
        });
    }
    let brackets = sign_changes(&points);
    Ok(CrossoverScan {
        original,
        transformed,
        points,
        brackets,
    })
}

/// Mean and standard error of `b/nb - a/na`, from exact integer sums of
/// `b * na - a * nb`.
fn paired_difference(a: &[u32], na: u32, b: &[u32], nb: u32) -> (f64, f64) {
    let t = a.len() as i128;
    let (mut sum, mut sq) = (0i128, 0i128);
    for (&x, &y) in a.iter().zip(b) {
        let v = i128::from(y) * i128::from(na) - i128::from(x) * i128::from(nb);
        sum += v;
        sq += v * v;
    }
    let scale = f64::from(na) * f64::from(nb);
    let mean = sum as f64 / t as f64 / scale;
    let var = if t > 1 {
        (t * sq - sum * sum) as f64 / (t * (t - 1)) as f64
    } else {
        0.0
    };
    (mean, libm::sqrt(var / t as f64) / scale)
}

/// Grid intervals across which the sign of the difference flips; exact
/// zeros carry no sign.
fn sign_changes(points: &[CrossoverPoint]) -> Vec<(f64, f64)> {
    let signed: Vec<(f64, bool)> = points
        .iter()
        .filter(|c| c.diff != 0.0)
        .map(|c| (c.p, c.diff > 0.0))
        .collect();
    signed
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| (w[0].0, w[1].0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monte_carlo::Sequential;
    use std::collections::BTreeMap as Histogram;

    fn interior_degrees(g: &LatticeGraph, margin: usize) -> Histogram<u32, usize> {
        let rim = g.rim_distances();
        let mut h = Histogram::new();
        for n in (0..g.node_count()).filter(|&n| rim[n] >= margin) {
            *h.entry(g.degree(n)).or_insert(0) += 1;
        }
        h
    }

    #[test]
    fn mapping_values() {
        assert!((scp_forward(JOINT_SATURATION).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(scp_forward(0.0).unwrap(), 0.0);
        assert!((scp_inverse(1.0).unwrap() - (2.0 - core::f64::consts::SQRT_2)).abs() < 1e-15);
        assert!(scp_forward(1.0).is_err());
        assert!(scp_forward(-0.1).is_err());
        assert!(scp_inverse(1.1).is_err());
        assert_eq!(joint_double_bond_scp(0.9).unwrap(), 1.0);
        assert!((joint_double_bond_scp(0.3).unwrap() - 0.555).abs() < 1e-12);
    }

    #[test]
    fn mapping_round_trip() {
        for i in 0..=1000 {
            let p = JOINT_SATURATION * f64::from(i) / 1000.0;
            assert!((scp_inverse(scp_forward(p).unwrap()).unwrap() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_contraction() {
        let src = LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 12).unwrap();
        let t = transform_graph(&src, TransformKind::DoubleHexToTriangle).unwrap();
        assert_eq!(t.graph.kind(), LatticeKind::Triangle);
        let h = interior_degrees(&t.graph, 1);
        assert_eq!(h.keys().copied().collect::<Vec<_>>(), [6]);
        assert!(t
            .graph
            .edges()
            .windows(2)
            .all(|w| (w[0].u, w[0].v) != (w[1].u, w[1].v)));
        // every A site survives, every B site is consumed
        let a_sites = (0..src.node_count())
            .filter(|&n| sublattice(src.offset(n)) == 0)
            .count();
        assert_eq!(t.graph.node_count(), a_sites);
        for e in t.graph.edges() {
            let (x, y) = (
                t.graph.position(e.u as usize),
                t.graph.position(e.v as usize),
            );
            assert!(((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) - 1.0).abs() < 1e-9);
        }
        let origin = src.node_at([0, 0]).unwrap();
        assert_eq!(t.graph.offset(t.node_map[origin].unwrap()), [0, 0]);
        assert_eq!(t.node_map[src.node_at([1, 0]).unwrap()], None);
    }

    #[test]
    fn square_contraction() {
        let src = LatticeGraph::generate(LatticeKind::HexagonThirdDoubleBond, 12).unwrap();
        let t = transform_graph(&src, TransformKind::ThirdDoubleHexToSquare).unwrap();
        assert_eq!(t.graph.kind(), LatticeKind::Square);
        let h = interior_degrees(&t.graph, 1);
        assert_eq!(h.keys().copied().collect::<Vec<_>>(), [4]);
        let singles = src.edges().iter().filter(|e| e.mult == 1).count();
        assert_eq!(t.graph.edge_count(), singles);
        assert!(t
            .graph
            .edges()
            .windows(2)
            .all(|w| (w[0].u, w[0].v) != (w[1].u, w[1].v)));
        for e in t.graph.edges() {
            let (x, y) = (t.graph.offset(e.u as usize), t.graph.offset(e.v as usize));
            assert_eq!((x[0] - y[0]).abs() + (x[1] - y[1]).abs(), 1);
        }
        let a = src.node_at([0, 0]).unwrap();
        let b = src.node_at([1, 0]).unwrap();
        assert_eq!(t.node_map[a], t.node_map[b]);
        assert_eq!(t.graph.offset(t.node_map[a].unwrap()), [0, 0]);
        assert_eq!(
            t.graph
                .offset(t.node_map[src.node_at([3, 0]).unwrap()].unwrap()),
            [1, -1]
        );
    }

    #[test]
    fn interior_matches_native_patch() {
        let src = LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 15).unwrap();
        let tri = transform_graph(&src, TransformKind::DoubleHexToTriangle)
            .unwrap()
            .graph;
        let native = LatticeGraph::generate(LatticeKind::Triangle, 3).unwrap();
        // every native bond around the origin exists in the contracted patch
        for e in native.edges() {
            let u = tri.node_at(native.offset(e.u as usize)).unwrap();
            let v = tri.node_at(native.offset(e.v as usize)).unwrap();
            assert!(tri
                .adjacency()
                .neighbors(u as u32)
                .iter()
                .any(|&(m, _)| m as usize == v));
        }
        let src = LatticeGraph::generate(LatticeKind::HexagonThirdDoubleBond, 15).unwrap();
        let sq = transform_graph(&src, TransformKind::ThirdDoubleHexToSquare)
            .unwrap()
            .graph;
        let native = LatticeGraph::generate(LatticeKind::Square, 3).unwrap();
        for e in native.edges() {
            let u = sq.node_at(native.offset(e.u as usize)).unwrap();
            let v = sq.node_at(native.offset(e.v as usize)).unwrap();
            assert!(sq
                .adjacency()
                .neighbors(u as u32)
                .iter()
                .any(|&(m, _)| m as usize == v));
        }
    }

    #[test]
    fn separate_and_joint_layouts() {
        let src = LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 8).unwrap();
        let sep = transform_graph(&src, TransformKind::DoubleHexSeparate).unwrap();
        let layers = sep.layer_graphs();
        assert_eq!(layers.len(), 2);
        for g in &layers {
            assert_eq!(g.kind(), LatticeKind::Hexagon);
            assert_eq!(
                interior_degrees(g, 1).keys().copied().collect::<Vec<_>>(),
                [3]
            );
        }
        let joint = transform_graph(&src, TransformKind::DoubleHexJoint).unwrap();
        assert_eq!(joint.layers, 1);
        assert!(matches!(&joint.rule, BondRule::JointWhere(f) if f.iter().all(|&x| x)));

        let src = LatticeGraph::generate(LatticeKind::HexagonThirdDoubleBond, 8).unwrap();
        let joint = transform_graph(&src, TransformKind::ThirdDoubleHexJoint).unwrap();
        let BondRule::JointWhere(flags) = &joint.rule else {
            panic!()
        };
        assert_eq!(
            flags.iter().filter(|&&f| f).count(),
            src.edges().iter().filter(|e| e.mult == 2).count()
        );
        let sep = transform_graph(&src, TransformKind::ThirdDoubleHexSeparate).unwrap();
        assert_eq!(sep.graph.total_copies(), src.total_copies());
    }

    #[test]
    fn kind_mismatch() {
        let sq = LatticeGraph::generate(LatticeKind::Square, 4).unwrap();
        for kind in TransformKind::ALL {
            assert!(matches!(
                transform_graph(&sq, kind),
                Err(Error::KindMismatch { .. })
            ));
        }
        let dh = LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 4).unwrap();
        assert!(transform_graph(&dh, TransformKind::ThirdDoubleHexToSquare).is_err());
    }

    #[test]
    fn names_round_trip() {
        for kind in TransformKind::ALL {
            assert_eq!(kind.name().parse::<TransformKind>().unwrap(), kind);
        }
        assert!("hex2tri".parse::<TransformKind>().is_err());
    }

    #[test]
    fn normalizer_is_source_resources() {
        let src = LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 10).unwrap();
        let scenario = ScenarioSpec::point_to_point(3);
        for kind in [
            TransformKind::DoubleHexJoint,
            TransformKind::DoubleHexToTriangle,
            TransformKind::DoubleHexSeparate,
        ] {
            let r = transformed_eqc(&Sequential, &src, kind, &scenario, 1.0, 4, 1).unwrap();
            assert_eq!(r.estimate.normalizer, 6, "{kind}");
        }
        // at full conversion: 3 joint bonds, 6 triangle bonds, 2 x 3 layered bonds
        let value = |kind| {
            transformed_eqc(&Sequential, &src, kind, &scenario, 1.0, 4, 1)
                .unwrap()
                .value()
        };
        assert_eq!(value(TransformKind::DoubleHexJoint), 0.5);
        assert_eq!(value(TransformKind::DoubleHexToTriangle), 1.0);
        assert_eq!(value(TransformKind::DoubleHexSeparate), 1.0);
        // joint saturation gives the same full network
        let at = transformed_eqc(
            &Sequential,
            &src,
            TransformKind::DoubleHexJoint,
            &scenario,
            JOINT_SATURATION,
            50,
            3,
        )
        .unwrap();
        assert_eq!(at.estimate.mean, 0.5);
        assert_eq!(at.estimate.std_error, 0.0);

        let src = LatticeGraph::generate(LatticeKind::HexagonThirdDoubleBond, 10).unwrap();
        let value = |kind| {
            transformed_eqc(&Sequential, &src, kind, &scenario, 1.0, 4, 1)
                .unwrap()
                .value()
        };
        assert_eq!(value(TransformKind::ThirdDoubleHexToSquare), 1.0);
        assert_eq!(value(TransformKind::ThirdDoubleHexSeparate), 1.0);
        assert_eq!(value(TransformKind::ThirdDoubleHexJoint), 0.75);
    }

    #[test]
    fn identical_kinds_scan_has_zero_difference() {
        let src = LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 8).unwrap();
        let scan = crossover_scan(
            &Sequential,
            &src,
            TransformKind::DoubleHexToTriangle,
            TransformKind::DoubleHexToTriangle,
            &ScenarioSpec::point_to_point(3),
            &[0.4, 0.6, 0.8],
            200,
            9,
        )
        .unwrap();
        assert!(scan
            .points
            .iter()
            .all(|c| c.diff == 0.0 && c.diff_stderr == 0.0));
        assert!(scan.brackets.is_empty());
    }

    #[test]
    fn joint_axis_reads_grid_as_joint_probability() {
        let src = LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 8).unwrap();
        let sc = ScenarioSpec::point_to_point(3);
        let scan = |axis| {
            crossover_scan_on(
                &Sequential,
                &src,
                TransformKind::DoubleHexJoint,
                TransformKind::DoubleHexToTriangle,
                &sc,
                axis,
                &[1.0],
                100,
                2,
            )
            .unwrap()
        };
        // p' = 1 is per-copy p = 2 - sqrt 2, where every joint bond is open
        assert_eq!(scan(ProbabilityAxis::Joint).points[0].original.mean, 0.5);
        assert_eq!(scan(ProbabilityAxis::Joint).points[0].transformed.mean, 1.0);
        assert_eq!(scan(ProbabilityAxis::PerCopy).points[0].original.mean, 0.5);
        let tdhex = LatticeGraph::generate(LatticeKind::HexagonThirdDoubleBond, 8).unwrap();
        let wrong = crossover_scan_on(
            &Sequential,
            &tdhex,
            TransformKind::ThirdDoubleHexJoint,
            TransformKind::ThirdDoubleHexToSquare,
            &sc,
            ProbabilityAxis::Joint,
            &[0.5],
            10,
            2,
        );
        assert!(matches!(wrong, Err(Error::InvalidScenario(_))));
        assert_eq!(
            "joint".parse::<ProbabilityAxis>().unwrap(),
            ProbabilityAxis::Joint
        );
    }

    #[test]
    fn terminal_on_consumed_site_is_rejected() {
        let src = LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 10).unwrap();
        // (4, 0) is a B site
        let r = transformed_eqc(
            &Sequential,
            &src,
            TransformKind::DoubleHexToTriangle,
            &ScenarioSpec::point_to_point(4),
            0.5,
            10,
            1,
        );
        assert!(matches!(r, Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn sign_change_brackets() {
        let mk = |p, diff| CrossoverPoint {
            p,
            original: EqcEstimate::from_counts(&[0], 1),
            transformed: EqcEstimate::from_counts(&[0], 1),
            diff,
            diff_stderr: 0.0,
        };
        let pts = [
            mk(0.1, -1.0),
            mk(0.2, 0.0),
            mk(0.3, 2.0),
            mk(0.4, 1.0),
            mk(0.5, -0.5),
        ];
        assert_eq!(sign_changes(&pts), [(0.1, 0.3), (0.4, 0.5)]);
        let (m, s) = paired_difference(&[1, 2, 3], 2, &[2, 2, 2], 4);
        assert!((m - (0.5 - 1.0)).abs() < 1e-15);
        assert!(s > 0.0);
    }
}
