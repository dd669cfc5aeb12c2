//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed instance description (bad graph, bad prior, bad JSON).
    #[error("parse error: {0}")]
    Parse(String),

    /// State-space or edge-space size exceeds the enumeration cap.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Operation called outside its domain (negative beta, beta=inf on an
    /// unsupported kind, gamma <= 0, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An instance cannot support the requested operation (e.g. empty
    /// ground set at beta = inf).
    #[error("unsupported instance: {0}")]
    Unsupported(String),

    /// A documented invariant of an input object does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Binary search could not find any qualifying next temperature.
    #[error("schedule stall: {0}")]
    Stall(String),

    /// The restoration loop exceeded its iteration cap. Carries the
    /// squared overlap of the residual state with the target.
    #[error("restoration failed after {rounds} rounds (residual fidelity {fidelity:.3e})")]
    RestorationFailed { rounds: u32, fidelity: f64 },

    /// The measurement-based state transfer exceeded its round cap.
    #[error("anneal failure at beta {beta}: {detail}")]
    AnnealFailure { beta: f64, detail: String },

    /// The target log Z(gamma) = 1 + log Z(inf) could not be bracketed.
    #[error("gamma location failure: {0}")]
    GammaLocation(String),

    /// A ratio estimate collapsed to zero; the telescoping product is
    /// meaningless from this point on.
    #[error("degenerate ratio at step {0}")]
    DegenerateRatio(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
