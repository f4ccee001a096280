//! Small named graphs for exact-enumeration checks.
//!
//! Every fixture from [`small_fixtures`] has at most [`SMALL_FIXTURE_COPIES`]
//! bond copies, so all `2^copies` configurations can be enumerated.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::lattice::{Edge, LatticeGraph, LatticeKind};
use crate::monte_carlo::Terminals;

pub const SMALL_FIXTURE_COPIES: usize = 12;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub graph: LatticeGraph,
    pub terminals: Terminals,
}

impl Fixture {
    fn between(name: &'static str, graph: LatticeGraph, a: [i64; 2], b: [i64; 2]) -> Result<Self> {
        let (a, b) = (graph.node_at(a)?, graph.node_at(b)?);
        let n1 = graph.degree(a).min(graph.degree(b));
        let terminals = Terminals::custom(&graph, vec![a], vec![b], n1)?;
        Ok(Fixture {
            name,
            graph,
            terminals,
        })
    }
}

/// Seven-site triangular wheel: a center, its six neighbors and the rim ring.
pub fn triangle_wheel() -> Result<LatticeGraph> {
    let ring: [[i64; 2]; 6] = [[1, 0], [1, 1], [0, 1], [-1, 0], [-1, -1], [0, -1]];
    let mut offsets = vec![[0, 0]];
    offsets.extend_from_slice(&ring);
    let mut edges = Vec::new();
    for i in 0..6u32 {
        edges.push(Edge {
            u: 0,
            v: i + 1,
            mult: 1,
        });
        edges.push(Edge {
            u: i + 1,
            v: (i + 1) % 6 + 1,
            mult: 1,
        });
    }
    LatticeGraph::from_parts(LatticeKind::Triangle, 1, offsets, edges)
}

/// One fixture per lattice kind, each with at most
/// [`SMALL_FIXTURE_COPIES`] copies and a single-node party on each side.
pub fn small_fixtures() -> Result<Vec<Fixture>> {
    Ok(vec![
        Fixture::between(
            "square-3x3",
            LatticeGraph::generate(LatticeKind::Square, 1)?,
            [-1, -1],
            [1, 1],
        )?,
        Fixture::between("triangle-wheel", triangle_wheel()?, [1, 0], [-1, 0])?,
        Fixture::between(
            "hexagon-star",
            LatticeGraph::generate(LatticeKind::Hexagon, 1)?,
            [1, -1],
            [-1, 1],
        )?,
        Fixture::between(
            "double-hexagon-star",
            LatticeGraph::generate(LatticeKind::HexagonDoubleBond, 1)?,
            [1, -1],
            [0, 0],
        )?,
        Fixture::between(
            "third-double-hexagon-star",
            LatticeGraph::generate(LatticeKind::HexagonThirdDoubleBond, 1)?,
            [0, 0],
            [1, -1],
        )?,
    ])
}

/// A realization on a 7x7 square patch with three bond-disjoint channels
/// between `(-1, 0)` and `(2, 0)`: the straight line, a detour through row 1
/// and a detour through row -2, plus dead-end and cross bonds that add none.
pub struct ThreeChannels {
    pub graph: LatticeGraph,
    pub capacities: Vec<u8>,
    pub source: usize,
    pub sink: usize,
}

pub fn three_channels() -> Result<ThreeChannels> {
    let graph = LatticeGraph::generate(LatticeKind::Square, 3)?;
    let chains: [&[[i64; 2]]; 7] = [
        &[[-1, 0], [0, 0], [1, 0], [2, 0]],
        &[[-1, 0], [-1, 1], [0, 1], [1, 1], [2, 1], [2, 0]],
        &[
            [-1, 0],
            [-1, -1],
            [-1, -2],
            [0, -2],
            [1, -2],
            [2, -2],
            [2, -1],
            [2, 0],
        ],
        &[[1, 0], [1, 1]],
        &[[0, 1], [0, 2]],
        &[[0, -1], [0, -2]],
        &[[-2, 1], [-1, 1]],
    ];
    let mut capacities = vec![0u8; graph.edge_count()];
    for chain in chains {
        for w in chain.windows(2) {
            let (a, b) = (graph.node_at(w[0])? as u32, graph.node_at(w[1])? as u32);
            let id = graph
                .adjacency()
                .neighbors(a)
                .iter()
                .find(|&&(n, _)| n == b)
                .map(|&(_, e)| e as usize)
                .ok_or_else(|| {
                    crate::Error::InvalidGraph(alloc::format!(
                        "{:?} and {:?} are not bonded",
                        w[0],
                        w[1]
                    ))
                })?;
            capacities[id] = 1;
        }
    }
    Ok(ThreeChannels {
        source: graph.node_at([-1, 0])?,
        sink: graph.node_at([2, 0])?,
        graph,
        capacities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_small() {
        let fixtures = small_fixtures().unwrap();
        assert_eq!(fixtures.len(), 5);
        for f in &fixtures {
            assert!(f.graph.total_copies() <= SMALL_FIXTURE_COPIES, "{}", f.name);
        }
        let wheel = triangle_wheel().unwrap();
        assert_eq!(
            (wheel.node_count(), wheel.edge_count(), wheel.degree(0)),
            (7, 12, 6)
        );
    }

    #[test]
    fn three_channel_layout() {
        let t = three_channels().unwrap();
        assert_eq!(
            t.capacities.iter().map(|&c| usize::from(c)).sum::<usize>(),
            19
        );
    }
}
