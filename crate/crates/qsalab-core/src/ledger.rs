//! Model-cost accounting.
//!
//! Every operation that conceptually consumes quantum-walk steps
//! increments a ledger. Reports show both wall-clock time and model cost,
//! and the scaling tests assert on the ledger exactly: one use of an
//! approximate reflection with k phase bits on a walk with phase gap
//! `delta_phase` costs `k * ceil(1/delta_phase)` walk steps; an exact
//! reflection is accounted as a single ideal pass, `ceil(1/delta_phase)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub walk_steps: u128,
    pub reflections: u128,
    pub ae_calls: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge_reflection(&mut self, walk_steps_per_use: u128) {
        self.reflections += 1;
        self.walk_steps += walk_steps_per_use;
    }

    pub fn charge_ae_call(&mut self) {
        self.ae_calls += 1;
    }

    /// Merge a sub-ledger accumulated by a parallel trial.
    pub fn merge(&mut self, other: &CostLedger) {
        self.walk_steps += other.walk_steps;
        self.reflections += other.reflections;
        self.ae_calls += other.ae_calls;
    }
}

/// Walk steps consumed by one use of a reflection operator.
pub fn reflection_walk_cost(phase_gap: f64, phase_bits: Option<u32>) -> u128 {
    let per_pass = (1.0 / phase_gap).ceil().max(1.0) as u128;
    match phase_bits {
        Some(k) => u128::from(k.max(1)) * per_pass,
        None => per_pass,
    }
}
