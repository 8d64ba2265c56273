// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Physical device parameters and the dimensionless coupling phases.
//!
//! This module converts cavity/SQUID geometry and qubit energies into the
//! quantities the Hamiltonian construction needs: the resonant-mode magnetic
//! field amplitude, the dimensionless flux phases φ₀ (resonant mode) and φ_j
//! (background modes), and the screening-corrected flux phase of the SQUID
//! loop.

use crate::constants::{
    FLUX_QUANTUM, HBAR, MICRO_EV, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY,
};
use crate::error::{Error, Result};

/// Field amplitude of the resonant mode in the reference device, in tesla.
/// The default mode volume is chosen so that `resonant_field_amplitude`
/// reproduces this value exactly.
pub const REFERENCE_FIELD_AMPLITUDE: f64 = 7.52e-11;

/// Upper validity bound for the screening parameter β_m: at 2/π the
/// flux-phase relation risks becoming multivalued.
pub const SCREENING_VALIDITY_BOUND: f64 = 2.0 / std::f64::consts::PI;

/// Experimental knobs of the cavity + dc-SQUID charge qubit.
///
/// All quantities are SI: meters, m², m³, rad/s, joules, radians. Unit
/// conversion from config-file units (GHz, μeV) happens at the parsing
/// boundary, never here.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalConfig {
    /// Mirror curvature radius R [m]; context geometry only.
    pub curvature_radius: f64,
    /// Cavity length L [m]; the resonant mode is the half-wavelength mode.
    pub cavity_length: f64,
    /// SQUID loop area S [m²].
    pub squid_area: f64,
    /// Resonant-mode volume V [m³]. Per-bath-mode volumes V_j are folded
    /// into the bath calibration (see `bath::discretize`).
    pub mode_volume: f64,
    /// Resonant angular frequency ω [rad/s].
    pub resonant_angular_frequency: f64,
    /// Cavity quality factor Q (dimensionless).
    pub quality_factor: f64,
    /// Charging energy E_C [J].
    pub charging_energy: f64,
    /// Josephson coupling energy E_J [J].
    pub josephson_energy: f64,
    /// Gate charge n_g (dimensionless); the branch construction assumes the
    /// charge-degeneracy point n_g = 1/2.
    pub gate_charge: f64,
    /// Classical flux phase φ_c = πΦ_c/Φ₀ [rad].
    pub classical_flux_phase: f64,
    /// Screening parameter β_m = 2LI_c/Φ₀ (dimensionless), must be < 2/π.
    pub screening_parameter: f64,
    /// SQUID position z along the cavity axis [m]; default L/2 (antinode of
    /// the half-wavelength magnetic field).
    pub squid_position: f64,
}

impl PhysicalConfig {
    /// Default mode volume for a given resonant frequency: the volume that
    /// makes the resonant field amplitude equal [`REFERENCE_FIELD_AMPLITUDE`].
    pub fn default_mode_volume(resonant_angular_frequency: f64) -> f64 {
        HBAR * resonant_angular_frequency
            / (VACUUM_PERMITTIVITY
                * SPEED_OF_LIGHT
                * SPEED_OF_LIGHT
                * REFERENCE_FIELD_AMPLITUDE
                * REFERENCE_FIELD_AMPLITUDE)
    }

    /// Cavity decay rate implied by the quality factor: γ = ω/Q [rad/s].
    pub fn q_derived_decay(&self) -> f64 {
        self.resonant_angular_frequency / self.quality_factor
    }

    /// Check all invariants. Returns a list of (non-fatal) warnings on
    /// success; hard violations return an invalid-config error.
    pub fn validate(&self) -> Result<Vec<String>> {
        let positives: [(&str, f64); 7] = [
            ("curvature_radius", self.curvature_radius),
            ("cavity_length", self.cavity_length),
            ("squid_area", self.squid_area),
            ("mode_volume", self.mode_volume),
            ("resonant_angular_frequency", self.resonant_angular_frequency),
            ("quality_factor", self.quality_factor),
            ("squid_position", self.squid_position),
        ];
        for (name, value) in positives {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be strictly positive and finite, got {value}"
                )));
            }
        }
        if !self.josephson_energy.is_finite() || self.josephson_energy < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "josephson_energy must be nonnegative and finite, got {}",
                self.josephson_energy
            )));
        }
        if !(self.charging_energy > self.josephson_energy) {
            return Err(Error::InvalidConfig(format!(
                "charge-qubit regime requires charging_energy > josephson_energy, \
                 got E_C = {} J, E_J = {} J",
                self.charging_energy, self.josephson_energy
            )));
        }
        if !(0.0..SCREENING_VALIDITY_BOUND).contains(&self.screening_parameter) {
            return Err(Error::InvalidConfig(format!(
                "screening_parameter must lie in [0, 2/π), got {}",
                self.screening_parameter
            )));
        }
        if !self.gate_charge.is_finite() || !self.classical_flux_phase.is_finite() {
            return Err(Error::InvalidConfig(
                "gate_charge and classical_flux_phase must be finite".into(),
            ));
        }

        let mut warnings = Vec::new();
        if self.josephson_energy > 0.0
            && self.charging_energy / self.josephson_energy < 3.0
        {
            warnings.push(format!(
                "charging-to-Josephson ratio E_C/E_J = {:.3} is below 3; the \
                 two-level charge-qubit reduction degrades at small ratios",
                self.charging_energy / self.josephson_energy
            ));
        }
        if self.squid_position > self.cavity_length {
            warnings.push(format!(
                "squid_position {} m lies outside the cavity of length {} m",
                self.squid_position, self.cavity_length
            ));
        }
        Ok(warnings)
    }
}

impl Default for PhysicalConfig {
    /// Reference device: 30 GHz half-wavelength cavity (L = λ/2 = 0.5 cm,
    /// R = 2.55 mm), Q = 10⁶, E_C = 122 μeV, E_J = 34 μeV, a (10 μm)² SQUID
    /// loop at the cavity center, biased at n_g = 1/2 and φ_c = π/4.
    fn default() -> Self {
        let omega = 2.0 * std::f64::consts::PI * 30.0e9;
        let length = 5.0e-3;
        PhysicalConfig {
            curvature_radius: 2.55e-3,
            cavity_length: length,
            squid_area: 1.0e-10,
            mode_volume: Self::default_mode_volume(omega),
            resonant_angular_frequency: omega,
            quality_factor: 1.0e6,
            charging_energy: 122.0 * MICRO_EV,
            josephson_energy: 34.0 * MICRO_EV,
            gate_charge: 0.5,
            classical_flux_phase: std::f64::consts::FRAC_PI_4,
            screening_parameter: 0.0,
            squid_position: 0.5 * length,
        }
    }
}

/// Parameters of one discretized background mode, as consumed by [`phi_j`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathModeParams {
    /// Mode angular frequency ω_j [rad/s].
    pub frequency: f64,
    /// Lorentzian weight M_j (dimensionless).
    pub weight: f64,
    /// Mode volume V_j [m³].
    pub mode_volume: f64,
}

/// Magnetic field amplitude of the resonant mode: √(ħω/(ε₀Vc²)) [T].
pub fn resonant_field_amplitude(cfg: &PhysicalConfig) -> Result<f64> {
    if !(cfg.mode_volume > 0.0) || !(cfg.resonant_angular_frequency > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "resonant field amplitude needs positive mode volume and \
             frequency, got V = {} m³, ω = {} rad/s",
            cfg.mode_volume, cfg.resonant_angular_frequency
        )));
    }
    Ok((HBAR * cfg.resonant_angular_frequency
        / (VACUUM_PERMITTIVITY * cfg.mode_volume * SPEED_OF_LIGHT * SPEED_OF_LIGHT))
        .sqrt())
}

/// Dimensionless flux phase of the resonant mode: φ₀ = πS·B/Φ₀ with B the
/// resonant field amplitude.
pub fn phi0(cfg: &PhysicalConfig) -> Result<f64> {
    let b = resonant_field_amplitude(cfg)?;
    Ok(std::f64::consts::PI * cfg.squid_area * b / FLUX_QUANTUM)
}

/// Lorentzian weight of a background mode at ω_j for a resonance at ω with
/// linewidth γ: M_j = amplitude · (γ/2)/√((ω_j−ω)² + (γ/2)²).
pub fn lorentzian_weight(omega_j: f64, omega: f64, gamma: f64, amplitude: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidBath(format!(
            "Lorentzian weight needs γ > 0, got {gamma}"
        )));
    }
    let detuning = omega_j - omega;
    let half = 0.5 * gamma;
    Ok(amplitude * half / (detuning * detuning + half * half).sqrt())
}

/// Dimensionless flux phase of one background mode:
/// φ_j = M_j (πS/Φ₀) √(ħω_j/(ε₀V_j c²)) sin(−ω_j z/c), with the sine factor
/// evaluated at the SQUID position z. The signed sine is kept exactly as
/// defined; its sign cancels in all quadratic observables.
pub fn phi_j(cfg: &PhysicalConfig, mode: &BathModeParams) -> Result<f64> {
    if !(mode.frequency > 0.0) {
        return Err(Error::InvalidBath(format!(
            "bath mode frequency must be positive, got {}",
            mode.frequency
        )));
    }
    if !(mode.mode_volume > 0.0) {
        return Err(Error::InvalidBath(format!(
            "bath mode volume must be positive, got {}",
            mode.mode_volume
        )));
    }
    let field = (HBAR * mode.frequency
        / (VACUUM_PERMITTIVITY * mode.mode_volume * SPEED_OF_LIGHT * SPEED_OF_LIGHT))
        .sqrt();
    let position_factor = (-(mode.frequency / SPEED_OF_LIGHT) * cfg.squid_position).sin();
    Ok(mode.weight * std::f64::consts::PI * cfg.squid_area * field * position_factor
        / FLUX_QUANTUM)
}

/// Screening-corrected flux phase: second-order perturbation recursion
/// φ_x + (π/2)β_m sin φ_x + ((π/2)β_m)² sin φ_x cos φ_x.
///
/// Agrees with the self-consistent fixed point of
/// φ = φ_x + (π/2)β_m sin φ to O(β_m³); see
/// [`screening_phase_fixed_point`] for the reference iteration.
pub fn screening_phase(phi_x: f64, beta_m: f64) -> Result<f64> {
    check_screening_parameter(beta_m)?;
    let k = std::f64::consts::FRAC_PI_2 * beta_m;
    Ok(phi_x + k * phi_x.sin() + k * k * phi_x.sin() * phi_x.cos())
}

/// Reference oracle for [`screening_phase`]: iterate the self-consistency
/// relation φ ← φ_x + (π/2)β_m sin φ to within 1e-12. The map is a
/// contraction for β_m < 2/π, so the iteration always converges on the
/// valid domain.
pub fn screening_phase_fixed_point(phi_x: f64, beta_m: f64) -> Result<f64> {
    check_screening_parameter(beta_m)?;
    let k = std::f64::consts::FRAC_PI_2 * beta_m;
    let mut phi = phi_x;
    for _ in 0..10_000 {
        let next = phi_x + k * phi.sin();
        if (next - phi).abs() <= 1e-12 {
            return Ok(next);
        }
        phi = next;
    }
    Err(Error::InvalidConfig(format!(
        "screening fixed point did not converge for φ_x = {phi_x}, β_m = {beta_m}"
    )))
}

fn check_screening_parameter(beta_m: f64) -> Result<()> {
    if !(0.0..SCREENING_VALIDITY_BOUND).contains(&beta_m) {
        return Err(Error::InvalidConfig(format!(
            "screening parameter must lie in [0, 2/π) to keep the flux-phase \
             relation single-valued, got {beta_m}"
        )));
    }
    Ok(())
}
