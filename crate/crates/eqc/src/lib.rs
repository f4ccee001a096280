//! Host side of `eqc-core`: rayon trial execution, configuration, data files
//! and the `eqc` command line.

pub mod cli;
pub mod config;
pub mod exec;
pub mod io;

pub use exec::Parallel;
