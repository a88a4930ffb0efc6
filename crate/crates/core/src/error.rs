use thiserror::Error;

use crate::state::FockWindow;

/// Errors raised by the simulation and optimization routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    /// Probability mass escaped (or would escape) the photon-number window.
    #[error("tail leak: boundary mass {mass:.3e} exceeds tolerance {tol:.3e} on window {window}")]
    TailLeak { mass: f64, tol: f64, window: FockWindow },

    #[error("photon number {n} lies outside window {window}")]
    OutOfWindow { n: u64, window: FockWindow },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Argument beyond the range where a recurrence is numerically stable.
    #[error("range error: {0}")]
    Range(String),

    #[error("jump overflow: {jumps} jumps exceeds the sanity bound {bound}")]
    JumpOverflow { jumps: usize, bound: usize },
}

pub type Result<T> = std::result::Result<T, FockError>;
