//! Simulation and estimation toolkit for a multi-particle Sagnac
//! interferometer with GHZ-entangled spin input.
//!
//! Each atom carries a spin-1/2 label and a single radial oscillator mode.
//! The two spin branches are dragged around the ring in opposite directions;
//! the rotation frequency ω_s to be estimated enters both the displacement of
//! the oscillator and a branch-dependent dynamical phase.
//!
//! - [`params`]: physical constants, drive profiles, spin branches
//! - [`evolution`]: closed-form coherent-state branch evolution
//! - [`fock_oracle`]: independent truncated-basis integrator
//! - [`metrology`]: quantum Fisher information and Cramér-Rao bounds
//! - [`parity`]: parity measurement after the recombination pulse
//! - [`sweep`]: deterministic parameter sweeps behind the command line tool
//! - [`selftest`]: invariant and oracle checks behind `ghz-sagnac selftest`

pub mod error;
pub mod evolution;
pub mod fock_oracle;
pub mod params;
pub mod metrology;
pub mod parity;
pub mod quadrature;
pub mod selftest;
pub mod sweep;
mod tensor;

pub use error::{Error, Result};
pub use evolution::{branch_state, ground_fidelity, BranchState};
pub use params::{DriveProfile, InducedDrive, PhysicalParams, SpinBranch};
