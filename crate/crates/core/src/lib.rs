//! Activated Random Walk and internal DLA on finite graphs with a sink.
//!
//! The crate is organised bottom-up: [`chains`] builds base chains, [`tape`]
//! provides quenched instruction streams, [`engine`] stabilizes
//! configurations, [`process`] drives the ARW process and its IDLA coupling,
//! and [`experiments`] holds the quantitative checks built on top.

pub mod chains;
pub mod config;
pub mod engine;
pub mod exact;
pub mod experiments;
pub mod linalg;
pub mod process;
pub mod rates;
pub mod seeds;
pub mod stats;
pub mod tape;

pub use chains::{BaseChain, VertexId};
pub use config::{Configuration, SiteState};
pub use engine::{FiringPolicy, Stabilized};
pub use rates::{Rate, SleepRates};
pub use tape::{Instruction, InstructionTape, Odometer};

use rayon::prelude::*;

/// Evaluates `f(0), ..., f(n - 1)` on the rayon pool and returns the results in
/// index order, so the output never depends on the number of workers.
pub fn par_map<T: Send>(n: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}
