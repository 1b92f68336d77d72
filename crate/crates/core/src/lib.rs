//! Lock-in range of a classical phase-locked loop with impulse signals
//! (zigzag phase-detector characteristic) and an active PI filter.
//!
//! The lock-in frequency is computed two ways: from closed-form separatrix
//! heights ([`analytic`]) and by tracing the separatrix numerically
//! ([`numeric`]). [`signal`] simulates the waveform-level loop to check the
//! averaged phase model it all rests on.

/// Library version, reported by front ends.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod analytic;
pub mod equilibria;
pub mod error;
pub mod integrate;
pub mod model;
pub mod numeric;
pub mod signal;

pub use analytic::{lock_in_analytic, LockInResult, Method};
pub use equilibria::{classify_stable, find_equilibria, Equilibrium, EquilibriumKind, StableKind};
pub use error::{Error, Result};
pub use integrate::{integrate, Direction, IntegratorOptions, StopSpec, System, Termination, Trajectory};
pub use model::{EquivState, LoopParameters, PhaseState, TRIANGULAR_SLOPE};
pub use numeric::{check_lock_in, lock_in_numeric, LockCheck};
