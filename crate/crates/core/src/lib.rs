//! Simulation and optimization of Fock-space lenses.
//!
//! A single bosonic mode is represented by its amplitudes over a window of
//! photon numbers. Kerr phases, drives and displacements act on that window
//! as diagonal and tridiagonal operators, so states with `10^5` photons stay
//! a few thousand amplitudes wide.

pub mod error;
mod kernel;
pub mod lens;
pub mod open_system;
pub mod optimize;
pub mod oracles;
pub mod propagate;
pub mod state;

pub use error::{FockError, Result};
pub use lens::{LensParams, ProtocolSchedule, Stage, WindowPolicy};
pub use num_complex::Complex64;
pub use open_system::{EnsembleConfig, EnsembleResult};
pub use optimize::{FitResult, OptimizationConfig, OptimizationResult};
pub use propagate::{HamiltonianSpec, Hopping, QuadraticPhase};
pub use state::{FockWindow, PhotonStatistics, StateVector};
