// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Discretization of the non-resonant "modes of the universe" into a finite
//! bath with calibrated couplings.
//!
//! The lossy cavity is modeled as one resonant quasi mode plus a dense comb
//! of N background modes on a uniform frequency grid centered at the
//! resonance. Each mode carries a Lorentzian weight M_j; the phase couplings
//! φ_j are rescaled by a single calibration constant so the golden-rule decay
//! of the resonant mode matches the target rate γ exactly.
//!
//! ## Numerical layout
//!
//! Carrier frequencies sit near 2e11 rad/s while mode spacings can be below
//! 0.1 rad/s, so differences of absolute frequencies carry rounding noise of
//! order ulp(ω) ≈ 3e-5 rad/s. The bath therefore stores the exact grid
//! `detunings` (offsets from the center, built without large-number
//! subtraction) alongside the absolute `frequencies`; all downstream
//! frequency differences must use the offsets.
//!
//! ## Coupling profile
//!
//! The per-mode volumes V_j are not fixed by the underlying model; this
//! implementation absorbs the Lorentzian line shape into them
//! (V_j = V·M_j²), which makes the phase couplings flat across the band
//! while `weights` carries the line shape. A flat coupling comb is the
//! quasi-Markovian limit the analytic propagator assumes; keeping the
//! Lorentzian in the couplings instead would square the line shape in the
//! effective spectral density and the propagated decay would no longer
//! resemble e^{−γt} on any grid.

use ndarray::Array1;

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::physparams::{lorentzian_weight, phi0, phi_j, BathModeParams, PhysicalConfig};

/// Spacing limit: the discrete bath must resolve the decay, Δω < γ/5.
pub const DENSE_BATH_FRACTION: f64 = 0.2;

/// Bandwidth floor: the grid must cover at least ±10γ around the resonance.
pub const MIN_HALF_BANDWIDTH_OVER_GAMMA: f64 = 10.0;

/// Parameters of the bath discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    /// Number of background modes N.
    pub mode_count: usize,
    /// Half bandwidth W/2 [rad/s]: the grid spans ω ± W/2.
    pub half_bandwidth: f64,
    /// Target golden-rule decay rate γ [rad/s] of the resonant mode.
    pub target_decay: f64,
    /// Dimensionless Lorentzian amplitude Λ (cavity-wall transparency knob).
    pub lorentz_amplitude: f64,
}

impl BathSpec {
    /// Default discretization for a given decay rate: N = 401 modes over
    /// ω ± 20γ with unit Lorentzian amplitude (spacing γ/10).
    pub fn default_for(target_decay: f64) -> Self {
        BathSpec {
            mode_count: 401,
            half_bandwidth: 20.0 * target_decay,
            target_decay,
            lorentz_amplitude: 1.0,
        }
    }

    /// Grid spacing Δω = W/(N−1) [rad/s].
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_bandwidth / (self.mode_count as f64 - 1.0)
    }

    /// Check the discretization invariants.
    pub fn validate(&self) -> Result<()> {
        if self.mode_count < 2 {
            return Err(Error::InvalidBath(format!(
                "bath needs at least 2 modes, got {}",
                self.mode_count
            )));
        }
        if !(self.target_decay > 0.0) || !self.target_decay.is_finite() {
            return Err(Error::InvalidBath(format!(
                "target decay must be positive and finite, got {}",
                self.target_decay
            )));
        }
        if !(self.lorentz_amplitude > 0.0) || !self.lorentz_amplitude.is_finite() {
            return Err(Error::InvalidBath(format!(
                "Lorentzian amplitude must be positive and finite, got {}",
                self.lorentz_amplitude
            )));
        }
        if self.half_bandwidth < MIN_HALF_BANDWIDTH_OVER_GAMMA * self.target_decay {
            return Err(Error::InvalidBath(format!(
                "half bandwidth {} rad/s does not resolve the Lorentzian; \
                 need at least 10γ = {} rad/s",
                self.half_bandwidth,
                MIN_HALF_BANDWIDTH_OVER_GAMMA * self.target_decay
            )));
        }
        let spacing = self.spacing();
        let limit = DENSE_BATH_FRACTION * self.target_decay;
        if spacing >= limit {
            return Err(Error::DenseBathViolation { spacing, limit });
        }
        Ok(())
    }
}

/// A calibrated discrete bath.
///
/// All arrays have length N = `mode_count`. `detunings[j]` is the exact grid
/// offset ω_j − ω; `frequencies[j] = center + detunings[j]` rounds that sum
/// to f64 and is provided for reporting and for constructions that need
/// absolute frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBath {
    /// Absolute mode frequencies ω_j [rad/s], strictly increasing.
    pub frequencies: Array1<f64>,
    /// Exact grid offsets ω_j − ω [rad/s]; the j-th entry is built as
    /// Δω·(j − (N−1)/2) with no large-number cancellation.
    pub detunings: Array1<f64>,
    /// Grid center ω [rad/s] (the resonant frequency).
    pub center: f64,
    /// Lorentzian weights M_j (dimensionless).
    pub weights: Array1<f64>,
    /// Calibrated dimensionless phase couplings φ_j.
    pub phase_couplings: Array1<f64>,
    /// Grid spacing Δω [rad/s].
    pub spacing: f64,
    /// Calibration constant κ multiplying the raw phase couplings; 1.0 when
    /// calibration is inactive because the raw on-resonance coupling
    /// vanishes (E_J = 0, zero SQUID area, or a field node at the SQUID).
    pub calibration_scalar: f64,
}

impl DiscretizedBath {
    /// Number of bath modes.
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    /// True when the bath has no modes.
    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Index of the grid point nearest the center frequency.
    pub fn center_index(&self) -> usize {
        let mut best = 0usize;
        let mut best_abs = f64::INFINITY;
        for (j, d) in self.detunings.iter().enumerate() {
            if d.abs() < best_abs {
                best_abs = d.abs();
                best = j;
            }
        }
        best
    }

    /// Poincaré revival time of the discrete bath, 2π/Δω [s].
    pub fn revival_time(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.spacing
    }

    /// Guard against simulating past the point where the discrete bath
    /// starts feeding energy back: requires t_max < 0.5·revival_time.
    pub fn check_horizon(&self, t_max: f64) -> Result<()> {
        let revival = self.revival_time();
        if !(t_max < 0.5 * revival) {
            return Err(Error::HorizonGuard { t_max, revival });
        }
        Ok(())
    }
}

/// Discretize and calibrate the bath for a given device.
///
/// The grid is uniform over [ω − W/2, ω + W/2]; weights come from
/// [`lorentzian_weight`], raw phase couplings from [`phi_j`] with the
/// Lorentzian absorbed into the per-mode volume (see module docs), and the
/// calibration constant κ is fixed at the zero-flux-phase reference so the
/// golden-rule rate of the branch couplings φ_jφ₀E_J equals the target decay
/// exactly. When that reference coupling vanishes identically (E_J = 0, zero
/// SQUID area, or a field node at the SQUID position) κ is left at 1; every
/// derived coupling is zero in that case and downstream code falls back to
/// the target decay for time scales.
pub fn discretize(spec: &BathSpec, cfg: &PhysicalConfig) -> Result<DiscretizedBath> {
    spec.validate()?;
    let n = spec.mode_count;
    let omega = cfg.resonant_angular_frequency;
    if !(omega > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "resonant frequency must be positive, got {omega}"
        )));
    }
    let spacing = spec.spacing();
    let half = 0.5 * (n as f64 - 1.0);

    let mut detunings = Array1::zeros(n);
    let mut frequencies = Array1::zeros(n);
    let mut weights = Array1::zeros(n);
    let mut raw_couplings = Array1::zeros(n);
    for j in 0..n {
        let offset = spacing * (j as f64 - half);
        let omega_j = omega + offset;
        detunings[j] = offset;
        frequencies[j] = omega_j;
        weights[j] = lorentzian_weight(
            omega_j,
            omega,
            spec.target_decay,
            spec.lorentz_amplitude,
        )?;
        // Absorb the Lorentzian into the per-mode volume: V_j = V·M_j².
        let mode = BathModeParams {
            frequency: omega_j,
            weight: weights[j],
            mode_volume: cfg.mode_volume * weights[j] * weights[j],
        };
        raw_couplings[j] = phi_j(cfg, &mode)?;
    }

    for j in 1..n {
        if !(frequencies[j] > frequencies[j - 1]) {
            return Err(Error::InvalidBath(format!(
                "grid spacing {spacing} rad/s is below the floating-point \
                 resolution at carrier frequency {omega} rad/s; frequencies \
                 are not strictly increasing"
            )));
        }
    }

    // Calibration at the zero-flux-phase reference: branch couplings there
    // are g_j = φ_jφ₀E_J, and the golden-rule rate 2π g(ω)²/(ħ²Δω) must hit
    // the target. The center grid point has zero detuning by construction.
    let center_index = {
        let mut best = 0usize;
        let mut best_abs = f64::INFINITY;
        for (j, d) in detunings.iter().enumerate() {
            if d.abs() < best_abs {
                best_abs = d.abs();
                best = j;
            }
        }
        best
    };
    let raw_center_coupling = raw_couplings[center_index] * phi0(cfg)? * cfg.josephson_energy;
    let calibration_scalar = if raw_center_coupling == 0.0 {
        1.0
    } else {
        // κ such that 2π(κ·g_raw(ω))²/(ħ²Δω) = γ.
        HBAR / raw_center_coupling.abs() * (spec.target_decay * spacing / (2.0 * std::f64::consts::PI)).sqrt()
    };
    let phase_couplings = raw_couplings.mapv(|p| calibration_scalar * p);

    Ok(DiscretizedBath {
        frequencies,
        detunings,
        center: omega,
        weights,
        phase_couplings,
        spacing,
        calibration_scalar,
    })
}

/// Golden-rule decay rate 2π g(ω)²/(ħ²Δω) [rad/s] for a coupling list
/// aligned with the bath, using the on-resonance coupling (grid point
/// nearest the center). Couplings are energies [J].
pub fn golden_rule_rate(bath: &DiscretizedBath, couplings: &[f64]) -> Result<f64> {
    if bath.is_empty() {
        return Err(Error::InvalidBath(
            "golden-rule rate of an empty bath is undefined".into(),
        ));
    }
    if couplings.len() != bath.len() {
        return Err(Error::ShapeMismatch(format!(
            "coupling list length {} does not match bath size {}",
            couplings.len(),
            bath.len()
        )));
    }
    let g = couplings[bath.center_index()];
    Ok(2.0 * std::f64::consts::PI * g * g / (HBAR * HBAR * bath.spacing))
}
