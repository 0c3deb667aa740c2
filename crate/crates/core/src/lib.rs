//! Classical scattering relation and leading-order semiclassical amplitudes
//! for compactly supported potential perturbations of ½‖ξ‖².
//!
//! The pipeline runs bottom-up:
//!
//! * [`dynamics`]: Hamiltonian flow, monodromy and the accumulated Lagrangian.
//! * [`asymptotics`]: launch planes, asymptotic directions, the impact map
//!   z ↦ ξ∞ and its angular density σ̂.
//! * [`branches`]: every impact parameter reaching a prescribed outgoing
//!   direction (multi-start damped Newton).
//! * [`semiclassics`]: modified action, generating-function checks, Maslov
//!   index and amplitude assembly.
//! * [`oracles`]: independent references for central potentials.
//! * [`checks`]: the invariant suites behind `scatrel check`.

// Negated comparisons deliberately reject NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod branches;
pub mod checks;
mod dopri;
pub mod dynamics;
pub mod error;
pub mod frame;
pub mod oracles;
pub mod par;
pub mod potential;
pub mod semiclassics;

pub use dynamics::{PhasePoint, ScatteringConfig, Trajectory, TOL_DEGENERATE};
pub use error::{Result, ScatError};
pub use par::Execution;
pub use potential::{Bump, PotentialField};
