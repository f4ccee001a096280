//! Rayon-backed trial executor.

use anyhow::Context;
use eqc_core::monte_carlo::{Executor, TrialBatch};
use rayon::prelude::*;

/// Trials per work item. Fixed so that the split never depends on the pool.
pub const CHUNK: u64 = 2048;

pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `threads == 0` lets rayon pick.
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .context("building the worker pool")?;
        Ok(Parallel { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn run<B: TrialBatch>(&self, batch: &B, trials: u64) -> Vec<u32> {
        let chunks = trials.div_ceil(CHUNK);
        let parts: Vec<Vec<u32>> = self.pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| batch.run(c * CHUNK..((c + 1) * CHUNK).min(trials)))
                .collect()
        });
        parts.concat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use eqc_core::lattice::{LatticeGraph, LatticeKind};
    use eqc_core::monte_carlo::{network_counts, Network, Sequential, Terminals};
    use eqc_core::ScenarioSpec;

    #[test]
    fn same_counts_as_sequential() {
        let g = LatticeGraph::generate(LatticeKind::Square, 8).unwrap();
        let t = Terminals::place(&g, &ScenarioSpec::point_to_point(3)).unwrap();
        let trials = 3 * CHUNK + 17;
        let seq = network_counts(
            &Sequential,
            Network::uniform(&g, 0.6).unwrap(),
            &t,
            trials,
            5,
        )
        .unwrap();
        for threads in [1, 3] {
            let par = network_counts(
                &Parallel::new(threads).unwrap(),
                Network::uniform(&g, 0.6).unwrap(),
                &t,
                trials,
                5,
            )
            .unwrap();
            assert_eq!(par, seq);
        }
    }
}
