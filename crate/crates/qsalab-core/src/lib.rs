//! Exact desk-scale simulator of quantum simulated annealing with
//! adaptively constructed cooling schedules.
//!
//! The crate enumerates small counting and Bayesian-inference problems
//! exactly, lifts their Metropolis chains to Szegedy walks, and runs the
//! full annealing pipeline (nondestructive amplitude estimation, adaptive
//! schedule construction, telescoping partition-function estimation)
//! against brute-force oracles.

pub mod amplitude;
pub mod chain;
pub mod cvec;
pub mod error;
pub mod ledger;
pub mod oracle;
pub mod pipeline;
pub mod problem;
pub mod rng;
pub mod schedule;
pub mod verify;
pub mod walk;

pub use error::{Error, Result};
pub use ledger::CostLedger;
pub use problem::{Beta, GibbsDistribution, ProblemInstance, ProblemKind};
pub use rng::Stream;
