// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Physical constants (2019 SI exact values / CODATA 2018).

/// Reduced Planck constant ħ [J·s].
pub const HBAR: f64 = 1.054_571_817e-34;

/// Planck constant h [J·s] (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Elementary charge e [C] (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Vacuum permittivity ε₀ [F/m].
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;

/// Speed of light in vacuum c [m/s] (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Superconducting flux quantum Φ₀ = h / (2e) [Wb].
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);

/// One electronvolt [J] (exact).
pub const ELECTRONVOLT: f64 = ELEMENTARY_CHARGE;

/// One micro-electronvolt [J].
pub const MICRO_EV: f64 = 1e-6 * ELECTRONVOLT;
