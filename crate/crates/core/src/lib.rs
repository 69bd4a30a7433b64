//! Simulation toolkit for entanglement harvesting in multiqubit
//! ultrastrong-coupling circuit QED.
//!
//! The crate is organised bottom-up:
//!
//! - [`statespace`]: truncated qubit-register ⊗ Fock space, ladder, Pauli and
//!   collective-spin operators, partial traces.
//! - [`model`]: the multiqubit Hamiltonian with the σₓσₓ term and the extended
//!   Dicke Hamiltonian.
//! - [`spectral`]: eigen-analysis, splitting law of the lowest USC manifold,
//!   angular-momentum target states and state classification.
//! - [`schedules`]: piecewise and sampled control pulses for g_i(t), ω_q^i(t).
//! - [`evolve`]: Schrödinger and dressed-basis master-equation propagation.
//! - [`observables`]: fidelity, extraction fidelity, purity, entropies, ⟨S²⟩.
//! - [`fluxqubit`]: four-junction flux-qubit circuit and flux-path synthesis.
//! - [`experiments`]: scenario drivers, presets, manifests and result files.
//!
//! Units: ħ = 1 and all frequencies are measured in units of the resonator
//! frequency ω_r unless stated otherwise.

pub mod error;
pub mod evolve;
pub mod experiments;
pub mod fluxqubit;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod schedules;
pub mod spectral;
pub mod statespace;
pub mod validation;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
