//! Exclusive quantum channels (EQC) on entanglement-percolated lattice networks.
//!
//! Every bond of a periodic 2D lattice carries a pure entangled pair that is
//! converted to a singlet with probability `p`. The number of exclusive
//! channels between two parties in one realization is the maximum number of
//! bond-disjoint open paths between them; EQC is its expectation normalized by
//! the fully connected value `N(1)`.
//!
//! The crate is `no_std` (it needs `alloc`). Trial fan-out over threads, file
//! formats and the command line live in the `eqc` companion crate.
//!
//! Module map:
//! - [`lattice`]: finite lattice patches and singlet conversion probability
//! - [`percolation`]: counter-based bond sampling and exhaustive enumeration
//! - [`flow`]: bond-disjoint channel counting (integral max-flow / min-cut)
//! - [`monte_carlo`]: scenarios, EQC estimates and largest-cluster statistics
//! - [`analytic`]: closed-form pairing expectation and `E0` model
//! - [`fitting`]: exponential distance law and effective radii
//! - [`fixtures`]: small graphs for exact-enumeration checks
//! - [`transform`]: entanglement-swapping lattice transformations
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod error;
pub mod fitting;
pub mod fixtures;
pub mod flow;
pub mod lattice;
pub mod monte_carlo;
pub mod percolation;
pub mod rng;
pub mod transform;
mod union_find;

pub use error::{Error, Result};
pub use lattice::{EntangledBondSpec, LatticeGraph, LatticeKind};
pub use monte_carlo::{EqcEstimate, ScenarioMode, ScenarioSpec, StreamPolicy};
