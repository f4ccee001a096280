//! Finite patches of the periodic 2D lattices.
//!
//! Nodes are addressed by integer offsets in the lattice's natural axes. The
//! square lattice uses `e1 = (1, 0)`, `e2 = (0, 1)`. The triangle lattice and
//! all honeycomb variants share `e1 = (1, 0)`, `e2 = (-1/2, sqrt(3)/2)`; the
//! honeycomb is the triangle lattice with every site of class
//! `(i + j) mod 3 == 2` removed. In every kind nearest neighbors sit at
//! Euclidean distance 1.
//!
//! A patch of extent `L` is the parallelogram `|i|, |j| <= L` around the
//! origin, with free boundaries. Honeycomb sites left without any bond are
//! dropped. Node ids are assigned row-major (`j` outer, `i` inner).

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Square,
    Triangle,
    Hexagon,
    /// Honeycomb with every bond doubled.
    HexagonDoubleBond,
    /// Honeycomb with one of its three bond directions doubled.
    HexagonThirdDoubleBond,
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 5] = [
        LatticeKind::Square,
        LatticeKind::Triangle,
        LatticeKind::Hexagon,
        LatticeKind::HexagonDoubleBond,
        LatticeKind::HexagonThirdDoubleBond,
    ];

    /// Incident bond copies of an interior node.
    pub fn coordination(self) -> u32 {
        match self {
            LatticeKind::Square => 4,
            LatticeKind::Triangle => 6,
            LatticeKind::Hexagon => 3,
            LatticeKind::HexagonDoubleBond => 6,
            LatticeKind::HexagonThirdDoubleBond => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Square => "square",
            LatticeKind::Triangle => "triangle",
            LatticeKind::Hexagon => "hexagon",
            LatticeKind::HexagonDoubleBond => "hexagon_double_bond",
            LatticeKind::HexagonThirdDoubleBond => "hexagon_third_double_bond",
        }
    }

    pub fn is_honeycomb(self) -> bool {
        matches!(
            self,
            LatticeKind::Hexagon
                | LatticeKind::HexagonDoubleBond
                | LatticeKind::HexagonThirdDoubleBond
        )
    }

    /// Cartesian position of a natural-axis offset.
    pub fn position(self, offset: [i64; 2]) -> [f64; 2] {
        let (i, j) = (offset[0] as f64, offset[1] as f64);
        match self {
            LatticeKind::Square => [i, j],
            _ => [i - 0.5 * j, HALF_SQRT3 * j],
        }
    }

    /// Inverse of [`LatticeKind::position`], rounded to the nearest site.
    pub fn offset_of(self, pos: [f64; 2]) -> [i64; 2] {
        match self {
            LatticeKind::Square => [libm::round(pos[0]) as i64, libm::round(pos[1]) as i64],
            _ => {
                let j = pos[1] / HALF_SQRT3;
                [libm::round(pos[0] + 0.5 * j) as i64, libm::round(j) as i64]
            }
        }
    }

    fn has_site(self, offset: [i64; 2]) -> bool {
        !self.is_honeycomb() || (offset[0] + offset[1]).rem_euclid(3) != 2
    }

    /// Forward bonds of a site as `(offset delta, multiplicity)`.
    fn forward_bonds(self, offset: [i64; 2]) -> &'static [([i64; 2], u8)] {
        match self {
            LatticeKind::Square => &[([1, 0], 1), ([0, 1], 1)],
            LatticeKind::Triangle => &[([1, 0], 1), ([0, 1], 1), ([1, 1], 1)],
            _ if (offset[0] + offset[1]).rem_euclid(3) != 0 => &[],
            LatticeKind::Hexagon => &[([1, 0], 1), ([0, 1], 1), ([-1, -1], 1)],
            LatticeKind::HexagonDoubleBond => &[([1, 0], 2), ([0, 1], 2), ([-1, -1], 2)],
            LatticeKind::HexagonThirdDoubleBond => &[([1, 0], 2), ([0, 1], 1), ([-1, -1], 1)],
        }
    }
}

impl core::fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "square" => LatticeKind::Square,
            "triangle" | "triangular" => LatticeKind::Triangle,
            "hexagon" | "honeycomb" => LatticeKind::Hexagon,
            "hexagon_double_bond" | "dhex" => LatticeKind::HexagonDoubleBond,
            "hexagon_third_double_bond" | "tdhex" => LatticeKind::HexagonThirdDoubleBond,
            _ => {
                return Err(Error::InvalidGraph(alloc::format!(
                    "unknown lattice kind {s:?}"
                )))
            }
        })
    }
}

/// One bond record: `mult` parallel entangled pairs between `u` and `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub mult: u8,
}

impl Edge {
    #[inline]
    pub fn other(&self, node: u32) -> u32 {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Compressed incidence lists: for node `n`, `entries[start[n]..start[n+1]]`
/// holds `(neighbor, edge id)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjacency {
    start: Vec<u32>,
    entries: Vec<(u32, u32)>,
}

impl Adjacency {
    fn build(node_count: usize, edges: &[Edge]) -> Self {
        let mut start = vec![0u32; node_count + 1];
        for e in edges {
            start[e.u as usize + 1] += 1;
            start[e.v as usize + 1] += 1;
        }
        for n in 0..node_count {
            start[n + 1] += start[n];
        }
        let mut fill = start.clone();
        let mut entries = vec![(0u32, 0u32); 2 * edges.len()];
        for (id, e) in edges.iter().enumerate() {
            entries[fill[e.u as usize] as usize] = (e.v, id as u32);
            fill[e.u as usize] += 1;
            entries[fill[e.v as usize] as usize] = (e.u, id as u32);
            fill[e.v as usize] += 1;
        }
        Adjacency { start, entries }
    }

    #[inline]
    pub fn neighbors(&self, node: u32) -> &[(u32, u32)] {
        let n = node as usize;
        &self.entries[self.start[n] as usize..self.start[n + 1] as usize]
    }
}

/// Immutable finite lattice patch.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeGraph {
    kind: LatticeKind,
    extent: u32,
    offsets: Vec<[i64; 2]>,
    edges: Vec<Edge>,
    degree: Vec<u32>,
    adjacency: Adjacency,
    index: BTreeMap<[i64; 2], u32>,
}

impl LatticeGraph {
    /// Patch of extent `extent` around the origin site.
    pub fn generate(kind: LatticeKind, extent: u32) -> Result<Self> {
        if extent == 0 {
            return Err(Error::ZeroExtent);
        }
        let l = i64::from(extent);
        let inside = |o: [i64; 2]| o[0].abs() <= l && o[1].abs() <= l && kind.has_site(o);

        let mut candidates = Vec::new();
        for j in -l..=l {
            for i in -l..=l {
                if inside([i, j]) {
                    candidates.push([i, j]);
                }
            }
        }
        let mut bonds = Vec::new();
        for &o in &candidates {
            for &(delta, mult) in kind.forward_bonds(o) {
                let t = [o[0] + delta[0], o[1] + delta[1]];
                if inside(t) {
                    bonds.push((o, t, mult));
                }
            }
        }
        // honeycomb rims can leave sites without bonds
        let mut used = BTreeMap::new();
        for &(a, b, _) in &bonds {
            used.insert(a, ());
            used.insert(b, ());
        }
        let offsets: Vec<[i64; 2]> = candidates
            .into_iter()
            .filter(|o| used.contains_key(o))
            .collect();
        let index: BTreeMap<[i64; 2], u32> = offsets
            .iter()
            .enumerate()
            .map(|(n, &o)| (o, n as u32))
            .collect();
        let edges = bonds
            .into_iter()
            .map(|(a, b, mult)| Edge {
                u: index[&a],
                v: index[&b],
                mult,
            })
            .collect();
        Self::from_parts(kind, extent, offsets, edges)
    }

    /// Builds a graph from explicit sites and bonds (fixtures, transforms).
    pub fn from_parts(
        kind: LatticeKind,
        extent: u32,
        offsets: Vec<[i64; 2]>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let n = offsets.len();
        let mut index = BTreeMap::new();
        for (id, &o) in offsets.iter().enumerate() {
            if index.insert(o, id as u32).is_some() {
                return Err(Error::InvalidGraph(alloc::format!("duplicate site {o:?}")));
            }
        }
        let mut degree = vec![0u32; n];
        for e in &edges {
            if e.u == e.v {
                return Err(Error::InvalidGraph(alloc::format!(
                    "self-loop at node {}",
                    e.u
                )));
            }
            if e.u as usize >= n || e.v as usize >= n {
                return Err(Error::InvalidGraph(alloc::format!(
                    "edge ({}, {}) out of range",
                    e.u,
                    e.v
                )));
            }
            if !(1..=4).contains(&e.mult) {
                return Err(Error::BadMultiplicity(e.mult));
            }
            degree[e.u as usize] += u32::from(e.mult);
            degree[e.v as usize] += u32::from(e.mult);
        }
        let adjacency = Adjacency::build(n, &edges);
        Ok(LatticeGraph {
            kind,
            extent,
            offsets,
            edges,
            degree,
            adjacency,
            index,
        })
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn extent(&self) -> u32 {
        self.extent
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Edge {
        self.edges[id]
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn offset(&self, node: usize) -> [i64; 2] {
        self.offsets[node]
    }

    pub fn position(&self, node: usize) -> [f64; 2] {
        self.kind.position(self.offsets[node])
    }

    /// Incident bond copies (double bonds count twice).
    pub fn degree(&self, node: usize) -> u32 {
        self.degree[node]
    }

    /// Total number of bond copies.
    pub fn total_copies(&self) -> usize {
        self.edges.iter().map(|e| usize::from(e.mult)).sum()
    }

    pub fn max_multiplicity(&self) -> u8 {
        self.edges.iter().map(|e| e.mult).max().unwrap_or(0)
    }

    /// Node at a natural-axis offset from the origin site.
    pub fn node_at(&self, offset: [i64; 2]) -> Result<usize> {
        self.index
            .get(&offset)
            .map(|&n| n as usize)
            .ok_or(Error::NoNodeAt(offset[0], offset[1]))
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.degree[node] < self.kind.coordination()
    }

    /// Rim nodes: fewer incident copies than the coordination number.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&n| self.is_boundary(n))
            .collect()
    }

    /// Hop distance from every node to the nearest rim node
    /// (`usize::MAX` where no rim node is reachable).
    pub fn rim_distances(&self) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.node_count()];
        let mut queue = VecDeque::new();
        for n in self.boundary_nodes() {
            dist[n] = 0;
            queue.push_back(n);
        }
        while let Some(n) = queue.pop_front() {
            for &(m, _) in self.adjacency.neighbors(n as u32) {
                let m = m as usize;
                if dist[m] == usize::MAX {
                    dist[m] = dist[n] + 1;
                    queue.push_back(m);
                }
            }
        }
        dist
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            kind: self.kind,
            extent: self.extent,
            nodes: (0..self.node_count())
                .map(|id| {
                    let [x, y] = self.position(id);
                    NodeRecord { id, x, y }
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .map(|(id, e)| EdgeRecord {
                    id,
                    u: e.u as usize,
                    v: e.v as usize,
                    mult: e.mult,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self> {
        for (expect, node) in doc.nodes.iter().enumerate() {
            if node.id != expect {
                return Err(Error::InvalidGraph(alloc::format!(
                    "node ids must be 0..n, got {}",
                    node.id
                )));
            }
        }
        for (expect, edge) in doc.edges.iter().enumerate() {
            if edge.id != expect {
                return Err(Error::InvalidGraph(alloc::format!(
                    "edge ids must be 0..m, got {}",
                    edge.id
                )));
            }
        }
        let offsets = doc
            .nodes
            .iter()
            .map(|n| doc.kind.offset_of([n.x, n.y]))
            .collect();
        let edges = doc
            .edges
            .iter()
            .map(|e| Edge {
                u: e.u as u32,
                v: e.v as u32,
                mult: e.mult,
            })
            .collect();
        Self::from_parts(doc.kind, doc.extent, offsets, edges)
    }
}

/// Serialized form: `{kind, extent, nodes: [{id, x, y}], edges: [{id, u, v, mult}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub kind: LatticeKind,
    pub extent: u32,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub id: usize,
    pub u: usize,
    pub v: usize,
    pub mult: u8,
}

/// Pure bond state `sqrt(l1)|00> + sqrt(l2)|11>`, `l1 >= l2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntangledBondSpec {
    lambda1: f64,
}

impl EntangledBondSpec {
    pub fn new(lambda1: f64) -> Result<Self> {
        if (0.5..=1.0).contains(&lambda1) {
            Ok(EntangledBondSpec { lambda1 })
        } else {
            Err(Error::InvalidLambda(lambda1))
        }
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        1.0 - self.lambda1
    }

    /// Optimal singlet conversion probability `min(1, 2(1 - l1))`.
    pub fn scp(&self) -> f64 {
        scp_from_state(self)
    }
}

pub fn scp_from_state(spec: &EntangledBondSpec) -> f64 {
    f64::min(1.0, 2.0 * (1.0 - spec.lambda1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_extent_one() {
        let g = LatticeGraph::generate(LatticeKind::Square, 1).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.edge_count(), 12);
        assert!(g.edges().iter().all(|e| e.mult == 1));
        let origin = g.node_at([0, 0]).unwrap();
        assert_eq!(g.degree(origin), 4);
        let rim = g.boundary_nodes();
        assert_eq!(rim.len(), 8);
        assert!(!rim.contains(&origin));
    }

    #[test]
    fn zero_extent_rejected() {
        for kind in LatticeKind::ALL {
            assert_eq!(LatticeGraph::generate(kind, 0), Err(Error::ZeroExtent));
        }
    }

    #[test]
    fn interior_coordination_and_unit_bonds() {
        for kind in LatticeKind::ALL {
            for l in 1..=5 {
                let g = LatticeGraph::generate(kind, l).unwrap();
                for e in g.edges() {
                    let (a, b) = (g.position(e.u as usize), g.position(e.v as usize));
                    let d = libm::hypot(a[0] - b[0], a[1] - b[1]);
                    assert!((d - 1.0).abs() < 1e-12, "{kind} bond length {d}");
                    assert_ne!(e.u, e.v);
                }
                for n in 0..g.node_count() {
                    assert!(g.degree(n) <= kind.coordination());
                    assert!(g.degree(n) > 0);
                }
                let origin = g.node_at([0, 0]).unwrap();
                if l >= 2 {
                    assert!(!g.is_boundary(origin), "{kind} origin on rim at L={l}");
                }
                assert!(!g.boundary_nodes().is_empty());
            }
        }
    }

    #[test]
    fn double_bond_multiplicities() {
        let g = LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 2).unwrap();
        assert!(g.edges().iter().all(|e| e.mult == 2));

        let g = LatticeGraph::generate(LatticeKind::HexagonThirdDoubleBond, 6).unwrap();
        let doubled = g.edges().iter().filter(|e| e.mult == 2).count();
        // one direction class in three; only rim truncation skews the ratio
        let ratio = doubled as f64 / g.edge_count() as f64;
        assert!((ratio - 1.0 / 3.0).abs() < 0.05, "{ratio}");
        // every node touches at most one double bond
        let mut touches = vec![0; g.node_count()];
        for e in g.edges().iter().filter(|e| e.mult == 2) {
            touches[e.u as usize] += 1;
            touches[e.v as usize] += 1;
        }
        assert!(touches.iter().all(|&t| t <= 1));
    }

    #[test]
    fn node_at_offsets() {
        let g = LatticeGraph::generate(LatticeKind::Square, 4).unwrap();
        let n = g.node_at([3, 0]).unwrap();
        assert_eq!(g.position(n), [3.0, 0.0]);
        assert_eq!(g.node_at([5, 0]), Err(Error::NoNodeAt(5, 0)));

        let h = LatticeGraph::generate(LatticeKind::Hexagon, 4).unwrap();
        let origin = h.node_at([0, 0]).unwrap();
        let nb = h.node_at([1, 0]).unwrap();
        assert!(h
            .adjacency()
            .neighbors(origin as u32)
            .iter()
            .any(|&(m, _)| m as usize == nb));
        assert_eq!(h.position(nb), [1.0, 0.0]);
        // hexagon centres are vacant
        assert!(h.node_at([2, 0]).is_err());
    }

    #[test]
    fn ids_are_row_major() {
        let g = LatticeGraph::generate(LatticeKind::Triangle, 3).unwrap();
        for n in 1..g.node_count() {
            let (a, b) = (g.offset(n - 1), g.offset(n));
            assert!((a[1], a[0]) < (b[1], b[0]));
        }
    }

    #[test]
    fn document_round_trip() {
        for kind in LatticeKind::ALL {
            let g = LatticeGraph::generate(kind, 3).unwrap();
            let back = LatticeGraph::from_document(&g.to_document()).unwrap();
            assert_eq!(g, back);
        }
    }

    #[test]
    fn scp_values() {
        let scp = |l| EntangledBondSpec::new(l).unwrap().scp();
        assert_eq!(scp(0.5), 1.0);
        assert_eq!(scp(1.0), 0.0);
        assert!((scp(0.7) - 0.6).abs() < 1e-12);
        assert!(EntangledBondSpec::new(0.49).is_err());
        assert!(EntangledBondSpec::new(1.01).is_err());
        let s = EntangledBondSpec::new(0.8).unwrap();
        assert!((s.lambda1() + s.lambda2() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn from_parts_validation() {
        let offsets = vec![[0, 0], [1, 0]];
        let bad =
            |e: Edge| LatticeGraph::from_parts(LatticeKind::Square, 1, offsets.clone(), vec![e]);
        assert!(bad(Edge {
            u: 0,
            v: 0,
            mult: 1
        })
        .is_err());
        assert!(bad(Edge {
            u: 0,
            v: 2,
            mult: 1
        })
        .is_err());
        assert_eq!(
            bad(Edge {
                u: 0,
                v: 1,
                mult: 0
            }),
            Err(Error::BadMultiplicity(0))
        );
        assert!(bad(Edge {
            u: 0,
            v: 1,
            mult: 2
        })
        .is_ok());
    }
}
