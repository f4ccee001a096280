//! Bond percolation realizations.
//!
//! Copy `c` of edge `e` in trial `t` is open iff lane `c` of
//! `philox(seed, t, e)` falls below the threshold for its probability (see
//! [`crate::rng`]). Nothing else feeds the outcome, so samples are
//! reproducible per trial and coupled across `p`: raising `p` only ever opens
//! more copies.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::lattice::LatticeGraph;
use crate::rng;

pub const DEFAULT_ENUMERATION_CAP: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PercolationParams {
    pub p: f64,
    pub master_seed: u64,
    pub trial_index: u64,
}

impl PercolationParams {
    pub fn new(p: f64, master_seed: u64, trial_index: u64) -> Result<Self> {
        check_probability(p)?;
        Ok(PercolationParams {
            p,
            master_seed,
            trial_index,
        })
    }
}

/// Number of open copies per edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PercolationSample {
    pub open_capacity: Vec<u8>,
}

impl PercolationSample {
    pub fn total_open(&self) -> usize {
        self.open_capacity.iter().map(|&c| usize::from(c)).sum()
    }
}

/// Conversion probability of each bond copy.
#[derive(Clone, Debug, PartialEq)]
pub enum BondProbabilities {
    Uniform(f64),
    /// One probability per edge id, shared by all copies of that edge.
    PerEdge(Vec<f64>),
}

impl BondProbabilities {
    pub fn compile(&self) -> Result<Thresholds> {
        match self {
            BondProbabilities::Uniform(p) => {
                check_probability(*p)?;
                Ok(Thresholds {
                    uniform: rng::threshold(*p),
                    per_edge: None,
                })
            }
            BondProbabilities::PerEdge(ps) => {
                let mut out = Vec::with_capacity(ps.len());
                for &p in ps {
                    check_probability(p)?;
                    out.push(rng::threshold(p));
                }
                Ok(Thresholds {
                    uniform: 0,
                    per_edge: Some(out),
                })
            }
        }
    }
}

/// Integer acceptance thresholds, see [`rng::threshold`].
#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds {
    uniform: u64,
    per_edge: Option<Vec<u64>>,
}

impl Thresholds {
    pub fn uniform(p: f64) -> Result<Self> {
        BondProbabilities::Uniform(p).compile()
    }

    #[inline]
    pub fn get(&self, edge: u32) -> u64 {
        match &self.per_edge {
            Some(t) => t[edge as usize],
            None => self.uniform,
        }
    }
}

/// Outcome source for one trial; cheap to construct and query lazily.
#[derive(Clone, Copy, Debug)]
pub struct TrialDraw<'a> {
    thresholds: &'a Thresholds,
    seed: u64,
    trial: u64,
    lane_offset: u8,
}

impl<'a> TrialDraw<'a> {
    pub fn new(thresholds: &'a Thresholds, seed: u64, trial: u64) -> Self {
        TrialDraw {
            thresholds,
            seed,
            trial,
            lane_offset: 0,
        }
    }

    /// Read copies starting at `lane`; used when the copies of a multi-bond
    /// are split into separate single-bond networks.
    pub fn with_lane_offset(mut self, lane: u8) -> Self {
        self.lane_offset = lane;
        self
    }

    #[inline]
    pub fn open_copies(&self, edge: u32, mult: u8) -> u8 {
        let words = rng::bond_words(self.seed, self.trial, edge);
        let t = self.thresholds.get(edge);
        let lo = usize::from(self.lane_offset);
        words[lo..lo + usize::from(mult)]
            .iter()
            .filter(|&&w| u64::from(w) < t)
            .count() as u8
    }

    pub fn sample(&self, graph: &LatticeGraph) -> PercolationSample {
        PercolationSample {
            open_capacity: graph
                .edges()
                .iter()
                .enumerate()
                .map(|(id, e)| self.open_copies(id as u32, e.mult))
                .collect(),
        }
    }
}

/// One realization with every copy open independently with probability `p`.
pub fn sample(graph: &LatticeGraph, params: &PercolationParams) -> Result<PercolationSample> {
    let thresholds = Thresholds::uniform(params.p)?;
    Ok(TrialDraw::new(&thresholds, params.master_seed, params.trial_index).sample(graph))
}

/// All `2^B` copy configurations with their probabilities.
pub fn enumerate_all(graph: &LatticeGraph, p: f64) -> Result<Enumeration> {
    enumerate_all_with_cap(graph, p, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_all_with_cap(graph: &LatticeGraph, p: f64, cap: usize) -> Result<Enumeration> {
    check_probability(p)?;
    let copies = graph.total_copies();
    if copies > cap || copies >= 64 {
        return Err(Error::TooManyCopies { copies, cap });
    }
    let mults: Vec<u8> = graph.edges().iter().map(|e| e.mult).collect();
    let mut pow_p = vec![1.0; copies + 1];
    let mut pow_q = vec![1.0; copies + 1];
    for k in 1..=copies {
        pow_p[k] = pow_p[k - 1] * p;
        pow_q[k] = pow_q[k - 1] * (1.0 - p);
    }
    Ok(Enumeration {
        mults,
        copies,
        pow_p,
        pow_q,
        next: 0,
        end: 1u64 << copies,
    })
}

pub struct Enumeration {
    mults: Vec<u8>,
    copies: usize,
    pow_p: Vec<f64>,
    pow_q: Vec<f64>,
    next: u64,
    end: u64,
}

impl Iterator for Enumeration {
    type Item = (PercolationSample, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let mut mask = self.next;
        self.next += 1;
        let open = mask.count_ones() as usize;
        let weight = self.pow_p[open] * self.pow_q[self.copies - open];
        let open_capacity = self
            .mults
            .iter()
            .map(|&m| {
                let bits = mask & ((1u64 << m) - 1);
                mask >>= m;
                bits.count_ones() as u8
            })
            .collect();
        Some((PercolationSample { open_capacity }, weight))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}
