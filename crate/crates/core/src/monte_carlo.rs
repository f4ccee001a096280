//! Monte Carlo estimation of EQC and of the largest-cluster fraction.
//!
//! Each trial is a pure function of `(seed, trial index)`; batches return one
//! integer per trial and every statistic is reduced from exact integer sums,
//! so results do not depend on how trials are split across workers.

use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::flow::FlowSolver;
use crate::lattice::LatticeGraph;
use crate::percolation::{Thresholds, TrialDraw};
use crate::rng;
use crate::union_find::UnionFind;

/// Minimum hop distance between any explicit terminal and the patch rim.
pub const GUARD_MARGIN: usize = 2;
/// Default pairwise spacing of a party's nodes.
pub const DEFAULT_SEPARATION: u32 = 6;

const TAG_DISTANCE_CURVE: u32 = 1;
const TAG_P_CURVE: u32 = 2;
const TAG_THETA_CURVE: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    /// One node each, `A` at the origin and `B` at `(d, 0)`.
    PointToPoint,
    /// `A` and `B` at distance `d` both sending to the patch rim.
    ToInfinity,
    /// `k` nodes each; parties are columns at `x = 0` and `x = d`.
    KtoK,
    /// One sender at the origin, `k` receivers in the column `x = d`.
    OneToK,
}

impl ScenarioMode {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioMode::PointToPoint => "p2p",
            ScenarioMode::ToInfinity => "inf",
            ScenarioMode::KtoK => "ktok",
            ScenarioMode::OneToK => "1tok",
        }
    }
}

impl core::str::FromStr for ScenarioMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "p2p" | "point-to-point" => ScenarioMode::PointToPoint,
            "inf" | "infinity" | "to-infinity" => ScenarioMode::ToInfinity,
            "ktok" | "k-to-k" => ScenarioMode::KtoK,
            "1tok" | "one-to-k" => ScenarioMode::OneToK,
            _ => return Err(Error::InvalidScenario(alloc::format!("unknown mode {s:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub mode: ScenarioMode,
    pub d: u32,
    pub k: u32,
    pub separation: u32,
}

impl ScenarioSpec {
    pub fn new(mode: ScenarioMode, d: u32) -> Self {
        ScenarioSpec {
            mode,
            d,
            k: 1,
            separation: DEFAULT_SEPARATION,
        }
    }

    pub fn point_to_point(d: u32) -> Self {
        Self::new(ScenarioMode::PointToPoint, d)
    }

    pub fn to_infinity(d: u32) -> Self {
        Self::new(ScenarioMode::ToInfinity, d)
    }

    pub fn k_to_k(k: u32, d: u32) -> Self {
        ScenarioSpec {
            k,
            ..Self::new(ScenarioMode::KtoK, d)
        }
    }

    pub fn one_to_k(k: u32, d: u32) -> Self {
        ScenarioSpec {
            k,
            ..Self::new(ScenarioMode::OneToK, d)
        }
    }

    pub fn with_separation(mut self, separation: u32) -> Self {
        self.separation = separation;
        self
    }

    pub fn with_distance(mut self, d: u32) -> Self {
        self.d = d;
        self
    }

    fn column(&self, x: i64) -> Vec<[i64; 2]> {
        let s = i64::from(self.separation);
        let k = i64::from(self.k);
        let first = -((k - 1) * s) / 2;
        (0..k).map(|j| [x, first + j * s]).collect()
    }
}

/// Terminal sets of one scenario and the EQC normalizer `N(1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Terminals {
    pub sources: Vec<usize>,
    pub sinks: Vec<usize>,
    pub normalizer: u32,
}

impl Terminals {
    pub fn place(graph: &LatticeGraph, scenario: &ScenarioSpec) -> Result<Self> {
        if scenario.d == 0 {
            return Err(Error::InvalidScenario("distance must be positive".into()));
        }
        if scenario.k == 0 {
            return Err(Error::InvalidScenario("party size must be positive".into()));
        }
        if scenario.k > 1 && scenario.separation == 0 {
            return Err(Error::InvalidScenario(
                "party separation must be positive".into(),
            ));
        }
        let d = i64::from(scenario.d);
        let nodes = |offsets: Vec<[i64; 2]>| -> Result<Vec<usize>> {
            offsets.into_iter().map(|o| graph.node_at(o)).collect()
        };
        let degree_sum = |ns: &[usize]| ns.iter().map(|&n| graph.degree(n)).sum::<u32>();
        let (sources, sinks, normalizer) = match scenario.mode {
            ScenarioMode::PointToPoint => {
                let a = nodes(alloc::vec![[0, 0]])?;
                let b = nodes(alloc::vec![[d, 0]])?;
                let n1 = degree_sum(&a).min(degree_sum(&b));
                (a, b, n1)
            }
            ScenarioMode::ToInfinity => {
                let ab = nodes(alloc::vec![[0, 0], [d, 0]])?;
                let n1 = degree_sum(&ab);
                check_guard(graph, &ab)?;
                return Ok(Terminals {
                    sources: ab,
                    sinks: graph.boundary_nodes(),
                    normalizer: n1,
                });
            }
            ScenarioMode::KtoK => {
                let a = nodes(scenario.column(0))?;
                let b = nodes(scenario.column(d))?;
                let n1 = degree_sum(&a).min(degree_sum(&b));
                (a, b, n1)
            }
            ScenarioMode::OneToK => {
                let a = nodes(alloc::vec![[0, 0]])?;
                let b = nodes(scenario.column(d))?;
                let n1 = degree_sum(&a);
                (a, b, n1)
            }
        };
        check_guard(graph, &sources)?;
        check_guard(graph, &sinks)?;
        Terminals::custom(graph, sources, sinks, normalizer)
    }

    /// Explicit terminals, e.g. on small fixtures; no rim guard is applied.
    pub fn custom(
        graph: &LatticeGraph,
        sources: Vec<usize>,
        sinks: Vec<usize>,
        normalizer: u32,
    ) -> Result<Self> {
        if sources.is_empty() || sinks.is_empty() {
            return Err(Error::InvalidScenario("empty terminal set".into()));
        }
        if sources
            .iter()
            .chain(&sinks)
            .any(|&n| n >= graph.node_count())
        {
            return Err(Error::InvalidScenario("terminal is not a node".into()));
        }
        if sources.iter().any(|s| sinks.contains(s)) {
            return Err(Error::InvalidScenario("parties overlap".into()));
        }
        if normalizer == 0 {
            return Err(Error::InvalidScenario("normalizer must be positive".into()));
        }
        Ok(Terminals {
            sources,
            sinks,
            normalizer,
        })
    }
}

fn check_guard(graph: &LatticeGraph, nodes: &[usize]) -> Result<()> {
    let dist = graph.rim_distances();
    for &n in nodes {
        if dist[n] < GUARD_MARGIN {
            return Err(Error::TooCloseToRim {
                node: n,
                distance: dist[n],
                required: GUARD_MARGIN,
            });
        }
    }
    Ok(())
}

/// What a trial samples: a graph, copy thresholds and how many single-bond
/// layers the copies of each edge are split into (channels of separate layers
/// cannot mix; the trial value is the sum over layers).
#[derive(Clone, Debug)]
pub struct Network<'g> {
    graph: &'g LatticeGraph,
    thresholds: Thresholds,
    layers: u8,
}

impl<'g> Network<'g> {
    pub fn uniform(graph: &'g LatticeGraph, p: f64) -> Result<Self> {
        Ok(Network {
            graph,
            thresholds: Thresholds::uniform(p)?,
            layers: 1,
        })
    }

    pub fn new(graph: &'g LatticeGraph, thresholds: Thresholds, layers: u8) -> Result<Self> {
        if layers == 0 || usize::from(layers) * usize::from(graph.max_multiplicity()) > 4 {
            return Err(Error::InvalidGraph(alloc::format!(
                "{layers} layers do not fit the copy lanes"
            )));
        }
        Ok(Network {
            graph,
            thresholds,
            layers,
        })
    }

    pub fn graph(&self) -> &'g LatticeGraph {
        self.graph
    }
}

/// Runs a block of trials and returns one integer per trial.
pub trait TrialBatch: Sync {
    fn run(&self, trials: Range<u64>) -> Vec<u32>;
}

/// Strategy for fanning trials out; results are always in trial order.
pub trait Executor {
    fn run<B: TrialBatch>(&self, batch: &B, trials: u64) -> Vec<u32>;
}

/// Runs everything on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn run<B: TrialBatch>(&self, batch: &B, trials: u64) -> Vec<u32> {
        batch.run(0..trials)
    }
}

/// Channel counts of one scenario on one network.
#[derive(Clone, Debug)]
pub struct EqcProblem<'g> {
    network: Network<'g>,
    sources: Vec<u32>,
    sinks: Vec<u32>,
    normalizer: u32,
    seed: u64,
}

impl<'g> EqcProblem<'g> {
    pub fn new(network: Network<'g>, terminals: &Terminals, seed: u64) -> Self {
        EqcProblem {
            network,
            sources: terminals.sources.iter().map(|&n| n as u32).collect(),
            sinks: terminals.sinks.iter().map(|&n| n as u32).collect(),
            normalizer: terminals.normalizer,
            seed,
        }
    }

    pub fn normalizer(&self) -> u32 {
        self.normalizer
    }

    /// Channel count of a single trial.
    pub fn trial(&self, solver: &mut FlowSolver, trial: u64) -> u32 {
        let net = &self.network;
        let draw = TrialDraw::new(&net.thresholds, self.seed, trial);
        let mult = net.graph.max_multiplicity();
        (0..net.layers)
            .map(|layer| {
                let layer_draw = draw.with_lane_offset(layer * mult);
                solver.max_flow(net.graph, &layer_draw, &self.sources, &self.sinks)
            })
            .sum()
    }
}

impl TrialBatch for EqcProblem<'_> {
    fn run(&self, trials: Range<u64>) -> Vec<u32> {
        let mut solver = FlowSolver::new(self.network.graph);
        trials.map(|t| self.trial(&mut solver, t)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqcEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub normalizer: u32,
    pub raw_mean_channels: f64,
}

impl EqcEstimate {
    /// Mean and standard error of `count / normalizer` over trials.
    pub fn from_counts(counts: &[u32], normalizer: u32) -> Self {
        let (mean, var) = integer_moments(counts);
        let n1 = f64::from(normalizer);
        let t = counts.len() as f64;
        EqcEstimate {
            mean: mean / n1,
            std_error: libm::sqrt(var / t) / n1,
            trials: counts.len() as u64,
            normalizer,
            raw_mean_channels: mean,
        }
    }
}

/// Sample mean and unbiased variance from exact integer sums.
fn integer_moments(values: &[u32]) -> (f64, f64) {
    let t = values.len() as u128;
    let sum: u128 = values.iter().map(|&c| u128::from(c)).sum();
    let sq: u128 = values.iter().map(|&c| u128::from(c) * u128::from(c)).sum();
    let mean = sum as f64 / t as f64;
    let var = if t > 1 {
        (t * sq - sum * sum) as f64 / (t * (t - 1)) as f64
    } else {
        0.0
    };
    (mean, var)
}

pub fn estimate_eqc(
    graph: &LatticeGraph,
    scenario: &ScenarioSpec,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<EqcEstimate> {
    estimate_eqc_with(&Sequential, graph, scenario, p, trials, seed)
}

pub fn estimate_eqc_with<E: Executor>(
    exec: &E,
    graph: &LatticeGraph,
    scenario: &ScenarioSpec,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<EqcEstimate> {
    check_probability(p)?;
    let terminals = Terminals::place(graph, scenario)?;
    estimate_network(exec, Network::uniform(graph, p)?, &terminals, trials, seed)
}

/// EQC of explicit terminals on an explicit network.
pub fn estimate_network<E: Executor>(
    exec: &E,
    network: Network<'_>,
    terminals: &Terminals,
    trials: u64,
    seed: u64,
) -> Result<EqcEstimate> {
    Ok(EqcEstimate::from_counts(
        &network_counts(exec, network, terminals, trials, seed)?,
        terminals.normalizer,
    ))
}

/// Per-trial channel counts, in trial order.
pub fn network_counts<E: Executor>(
    exec: &E,
    network: Network<'_>,
    terminals: &Terminals,
    trials: u64,
    seed: u64,
) -> Result<Vec<u32>> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let problem = EqcProblem::new(network, terminals, seed);
    Ok(exec.run(&problem, trials))
}

/// How the points of a distance sweep share random numbers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamPolicy {
    /// Every distance sees the same bond configurations, so differences
    /// between points carry far less noise than the points themselves.
    #[default]
    Common,
    /// Every distance draws from its own sub-stream.
    Independent,
}

/// One estimate per distance.
#[allow(clippy::too_many_arguments)]
pub fn eqc_curve_vs_distance<E: Executor>(
    exec: &E,
    graph: &LatticeGraph,
    template: &ScenarioSpec,
    p: f64,
    d_values: &[u32],
    trials: u64,
    seed: u64,
    policy: StreamPolicy,
) -> Result<Vec<(u32, EqcEstimate)>> {
    d_values
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let s = match policy {
                StreamPolicy::Common => seed,
                StreamPolicy::Independent => rng::derive_seed(seed, TAG_DISTANCE_CURVE, i as u64),
            };
            let est = estimate_eqc_with(exec, graph, &template.with_distance(d), p, trials, s)?;
            Ok((d, est))
        })
        .collect()
}

/// One estimate per bond probability at a fixed scenario.
pub fn eqc_curve_vs_p<E: Executor>(
    exec: &E,
    graph: &LatticeGraph,
    scenario: &ScenarioSpec,
    p_values: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<(f64, EqcEstimate)>> {
    p_values.iter().try_for_each(|&p| check_probability(p))?;
    let terminals = Terminals::place(graph, scenario)?;
    p_values
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let s = rng::derive_seed(seed, TAG_P_CURVE, i as u64);
            Ok((
                p,
                estimate_network(exec, Network::uniform(graph, p)?, &terminals, trials, s)?,
            ))
        })
        .collect()
}

/// Largest open cluster statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub theta_p: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Size of the largest open cluster per trial.
#[derive(Clone, Debug)]
pub struct ThetaProblem<'g> {
    graph: &'g LatticeGraph,
    thresholds: Thresholds,
    seed: u64,
}

impl<'g> ThetaProblem<'g> {
    pub fn new(graph: &'g LatticeGraph, p: f64, seed: u64) -> Result<Self> {
        Ok(ThetaProblem {
            graph,
            thresholds: Thresholds::uniform(p)?,
            seed,
        })
    }
}

impl TrialBatch for ThetaProblem<'_> {
    fn run(&self, trials: Range<u64>) -> Vec<u32> {
        let mut uf = UnionFind::new(self.graph.node_count());
        trials
            .map(|t| {
                uf.reset();
                let draw = TrialDraw::new(&self.thresholds, self.seed, t);
                let mut largest = u32::from(self.graph.node_count() > 0);
                for (id, e) in self.graph.edges().iter().enumerate() {
                    if draw.open_copies(id as u32, e.mult) > 0 {
                        largest = largest.max(uf.union(e.u, e.v));
                    }
                }
                largest
            })
            .collect()
    }
}

pub fn estimate_theta(
    graph: &LatticeGraph,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<ClusterStats> {
    estimate_theta_with(&Sequential, graph, p, trials, seed)
}

pub fn estimate_theta_with<E: Executor>(
    exec: &E,
    graph: &LatticeGraph,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<ClusterStats> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let sizes = exec.run(&ThetaProblem::new(graph, p, seed)?, trials);
    let (mean, var) = integer_moments(&sizes);
    let n = graph.node_count() as f64;
    Ok(ClusterStats {
        theta_p: mean / n,
        std_error: libm::sqrt(var / trials as f64) / n,
        trials,
    })
}

pub fn theta_curve<E: Executor>(
    exec: &E,
    graph: &LatticeGraph,
    p_values: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<(f64, ClusterStats)>> {
    p_values
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let s = rng::derive_seed(seed, TAG_THETA_CURVE, i as u64);
            Ok((p, estimate_theta_with(exec, graph, p, trials, s)?))
        })
        .collect()
}

/// Grid interval with the steepest rise of an order-parameter curve.
pub fn steepest_rise(curve: &[(f64, f64)]) -> Option<(f64, f64)> {
    curve
        .windows(2)
        .max_by(|a, b| {
            let sa = (a[1].1 - a[0].1) / (a[1].0 - a[0].0);
            let sb = (b[1].1 - b[0].1) / (b[1].0 - b[0].0);
            sa.total_cmp(&sb)
        })
        .map(|w| (w[0].0, w[1].0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeKind;

    fn square(l: u32) -> LatticeGraph {
        LatticeGraph::generate(LatticeKind::Square, l).unwrap()
    }

    #[test]
    fn trivial_endpoints() {
        let g = square(10);
        for d in [1, 3, 7] {
            let e = estimate_eqc(&g, &ScenarioSpec::point_to_point(d), 1.0, 50, 1).unwrap();
            assert_eq!(e.mean, 1.0);
            assert_eq!(e.std_error, 0.0);
            assert_eq!(e.normalizer, 4);
            let z = estimate_eqc(&g, &ScenarioSpec::point_to_point(d), 0.0, 50, 1).unwrap();
            assert_eq!(z.mean, 0.0);
        }
        let inf = estimate_eqc(&g, &ScenarioSpec::to_infinity(3), 1.0, 10, 1).unwrap();
        assert_eq!(inf.normalizer, 8);
        assert_eq!(inf.mean, 1.0);
    }

    #[test]
    fn normalizers() {
        let g = square(20);
        let t = Terminals::place(&g, &ScenarioSpec::k_to_k(3, 8)).unwrap();
        assert_eq!((t.sources.len(), t.sinks.len(), t.normalizer), (3, 3, 12));
        let t = Terminals::place(&g, &ScenarioSpec::one_to_k(3, 8)).unwrap();
        assert_eq!((t.sources.len(), t.sinks.len(), t.normalizer), (1, 3, 4));
        let e = estimate_eqc(&g, &ScenarioSpec::k_to_k(2, 8), 1.0, 5, 0).unwrap();
        assert_eq!(e.mean, 1.0);
    }

    #[test]
    fn party_spacing() {
        let g = square(20);
        let spec = ScenarioSpec::k_to_k(3, 7).with_separation(6);
        let t = Terminals::place(&g, &spec).unwrap();
        let pos: Vec<_> = t
            .sources
            .iter()
            .chain(&t.sinks)
            .map(|&n| g.position(n))
            .collect();
        for (i, a) in pos.iter().enumerate() {
            for b in &pos[i + 1..] {
                assert!(libm::hypot(a[0] - b[0], a[1] - b[1]) >= 6.0 - 1e-12);
            }
        }
    }

    #[test]
    fn guard_and_validation() {
        let g = square(6);
        assert!(matches!(
            estimate_eqc(&g, &ScenarioSpec::point_to_point(5), 0.5, 1, 0),
            Err(Error::TooCloseToRim { .. })
        ));
        assert!(estimate_eqc(&g, &ScenarioSpec::point_to_point(4), 0.5, 1, 0).is_ok());
        assert!(estimate_eqc(&g, &ScenarioSpec::point_to_point(9), 0.5, 1, 0).is_err());
        assert!(estimate_eqc(&g, &ScenarioSpec::point_to_point(0), 0.5, 1, 0).is_err());
        assert!(estimate_eqc(&g, &ScenarioSpec::point_to_point(2), 1.5, 1, 0).is_err());
        assert_eq!(
            estimate_eqc(&g, &ScenarioSpec::point_to_point(2), 0.5, 0, 0),
            Err(Error::NoTrials)
        );
    }

    #[test]
    fn estimate_statistics() {
        let e = EqcEstimate::from_counts(&[0, 4, 2, 2], 4);
        assert_eq!(e.raw_mean_channels, 2.0);
        assert_eq!(e.mean, 0.5);
        // sample sd of [0, 1, .5, .5] is sqrt(1/6)
        assert!((e.std_error - libm::sqrt(1.0 / 6.0) / 2.0).abs() < 1e-15);
        assert_eq!(EqcEstimate::from_counts(&[3], 4).std_error, 0.0);
    }

    #[test]
    fn coupled_counts_monotone_in_p() {
        let g = square(12);
        let t = Terminals::place(&g, &ScenarioSpec::point_to_point(4)).unwrap();
        let counts =
            |p| network_counts(&Sequential, Network::uniform(&g, p).unwrap(), &t, 300, 11).unwrap();
        let mut prev = counts(0.3);
        for p in [0.45, 0.55, 0.7, 0.9] {
            let cur = counts(p);
            assert!(prev.iter().zip(&cur).all(|(a, b)| a <= b), "p={p}");
            prev = cur;
        }
    }

    #[test]
    fn theta_endpoints() {
        let g = LatticeGraph::generate(LatticeKind::Triangle, 5).unwrap();
        assert_eq!(estimate_theta(&g, 1.0, 5, 0).unwrap().theta_p, 1.0);
        let z = estimate_theta(&g, 0.0, 5, 0).unwrap();
        assert_eq!(z.theta_p, 1.0 / g.node_count() as f64);
        assert_eq!(z.std_error, 0.0);
    }

    #[test]
    fn steepest_interval() {
        let c = [(0.1, 0.0), (0.2, 0.01), (0.3, 0.5), (0.4, 0.6)];
        assert_eq!(steepest_rise(&c), Some((0.2, 0.3)));
        assert_eq!(steepest_rise(&c[..1]), None);
    }

    #[test]
    fn mode_names_parse() {
        for m in [
            ScenarioMode::PointToPoint,
            ScenarioMode::ToInfinity,
            ScenarioMode::KtoK,
            ScenarioMode::OneToK,
        ] {
            assert_eq!(m.name().parse::<ScenarioMode>().unwrap(), m);
        }
        assert!("bogus".parse::<ScenarioMode>().is_err());
    }
}
