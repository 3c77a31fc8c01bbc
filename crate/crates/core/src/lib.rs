//! Simulation kernels for measuring infinite-temperature out-of-time-ordered
//! correlators (OTOCs) with two Bell-paired copies of a spin system.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, plotting and the
//! command-line front end live in the `otoc-lab` companion crate.
//!
//! Module map:
//!
//! - [`qstate`]: state vectors, phase frames, Bell states, local observables,
//!   joint `V ⊗ Vᵀ` expectation values and shot sampling.
//! - [`hamiltonians`]: Pauli strings, the long-range XY chain builders, frame
//!   conjugation and the `Hᵀ = −H` certification.
//! - [`evolution`]: block-diagonal exact propagators, doubled-copy evolution and
//!   the Lindblad integrator.
//! - [`protocol`]: the trace oracle and the Bell-protocol evaluation of OTOCs.
//! - [`noise`]: the imperfection channels and scaling-exponent fits.
//! - [`varprep`]: variational preparation of purified operator states and the
//!   analytic fidelity engine.
//!
//! # Conventions
//!
//! Qubits are numbered from 0. In an `n`-qubit register, bit `j` of an
//! amplitude index is qubit `j`. Doubled registers (two copies of an `n`-qubit
//! system) use a pair-local layout: register qubit `2j` is site `j` of copy 1
//! and register qubit `2j + 1` is site `j` of copy 2.
#![no_std]
// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod evolution;
pub mod hamiltonians;
pub mod linalg;
pub mod noise;
pub mod protocol;
pub mod qstate;
pub mod varprep;

pub use error::{Error, Result};

/// Version of this crate, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use num_complex::Complex64 as C64;
