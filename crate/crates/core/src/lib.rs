//! Simulation and analysis of a two-mode cavity-optomechanical quantum phase
//! gate.
//!
//! Two optical cavity modes, each carrying a photonic qubit in the
//! `{|0⟩, |1⟩}` Fock subspace, couple to a single mechanical resonator through
//! the radiation-pressure interaction. The resonator mediates an effective
//! cross-Kerr phase between the modes; with suitable detunings and couplings
//! the interaction realizes a controlled-phase gate with conditional phase π.
//!
//! The crate is organized as:
//!
//! * [`operators`]: truncated Fock-space linear algebra (ladder operators,
//!   tensor embedding, displacement and thermal states, partial trace).
//! * [`model`]: system parameters, the rotating-frame Hamiltonian, logical
//!   basis and target states, and a few unit-conversion helpers.
//! * [`analytic`]: closed-form lossless results (decoherence coefficients,
//!   reduced optical state, state and gate fidelity) with independent
//!   matrix-trace oracles.
//! * [`lindblad`]: the dissipative master equation, adaptive time
//!   integration and the dissipative gate fidelity.
//!
//! Units: `ħ = 1` and all rates are expressed in units of the mechanical
//! frequency `ω_m`, so times are dimensionless `ω_m t`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod error;
pub mod lindblad;
pub mod model;
pub mod operators;

pub use error::{Error, Result};
pub use lindblad::{EvolutionConfig, FidelityTrace};
pub use model::{QubitAmplitudes, SystemParams};
pub use operators::{DensityMatrix, Op, SpaceLayout};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
