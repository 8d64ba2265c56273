// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Quasi-normal-mode model of a charge qubit in a lossy cavity.
//!
//! The crate models a dc-SQUID charge qubit sitting at the center of a lossy
//! half-wavelength cavity. The cavity supports one resonant mode plus a dense
//! band of non-resonant background modes; coupling to the band is what damps
//! the resonant mode and dephases the qubit. Everything is built from closed
//! algebra on quadratic Hamiltonians:
//!
//! * [`physparams`] — device parameters, derived scales, SQUID screening.
//! * [`bath`] — discretized background band and its golden-rule calibration.
//! * [`hamiltonian`] — the two qubit-conditioned oscillator Hamiltonians and
//!   the static displacements induced by the forcing terms.
//! * [`dynamics`] — Heisenberg-picture propagator coefficients, either from
//!   the analytic Wigner–Weisskopf form or from exact diagonalization.
//! * [`observables`] — photon number, forcing offsets, and the qubit
//!   decoherence factor (exact and closed-form).
//! * [`fockcheck`] — small brute-force Fock-space cross-checks.
//! * [`scenario`] — runnable scenario definitions and the config-file parser.
//! * [`runner`] — orchestration: run a scenario, sweep a parameter, write
//!   CSV results and a manifest.

pub mod bath;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod fockcheck;
pub mod hamiltonian;
pub mod linalg;
pub mod observables;
pub mod physparams;
pub mod runner;
pub mod scenario;

pub use error::{Error, Result};
