// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Branch Hamiltonians of the dressed qubit–cavity system and the
//! displacement transformation that removes their linear forcing terms.
//!
//! At the charge-degeneracy point the qubit's σ_x eigenstates |k⟩ (k = 0, 1)
//! each see an effective quadratic boson Hamiltonian
//!
//! H^(k) = ħΩ^(k) b†b + Σ_j ħω_j b_j†b_j + Σ_j g_j^(k)(b†b_j + b_j†b)
//!        + iξ^(k)(b† − b) + i Σ_j ξ_j^(k)(b_j† − b_j) + ħN^(k),
//!
//! whose parameters differ between branches only by the overall sign (−1)^k
//! on every E_J-dependent term. Couplings and forcings are stored as
//! energies (joules); frequencies as rad/s.
//!
//! ## Rotating-frame bookkeeping
//!
//! The carrier ω ≈ 2e11 rad/s dwarfs every dynamical scale (pulls and decay
//! rates of order 1 rad/s), so differences of absolute frequencies lose
//! ~1e-5 rad/s to rounding. Each branch therefore carries exact offset-space
//! copies of its frequencies: `frequency_pull` = Ω^(k) − ω and
//! `bath_detunings` = ω_j − ω, both built without large-number subtraction.
//! Downstream propagators work entirely in the frame rotating at
//! `frame_frequency` = ω.

use ndarray::Array1;
use num_complex::Complex64;

use crate::bath::DiscretizedBath;
use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::physparams::{phi0, screening_phase, PhysicalConfig};

/// Photon-phase threshold above which the quadratic flux expansion becomes
/// questionable: warn when φ₀·max(1, √n̄) ≥ 1e-3.
pub const WEAK_NONLINEARITY_LIMIT: f64 = 1e-3;

/// Effective Hamiltonian of one qubit branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchHamiltonian {
    /// Branch index k ∈ {0, 1} (σ_x eigenstate label).
    pub branch: u8,
    /// Dressed resonant frequency Ω^(k) [rad/s] (absolute).
    pub shifted_frequency: f64,
    /// Exact frequency pull Ω^(k) − ω [rad/s]; sign flips with the branch.
    pub frequency_pull: f64,
    /// Rotating-frame reference ω [rad/s].
    pub frame_frequency: f64,
    /// Qubit-conditioned beam-splitter couplings g_j^(k) [J].
    pub couplings: Array1<f64>,
    /// Linear forcing on the resonant mode ξ^(k) [J].
    pub resonant_forcing: f64,
    /// Linear forcings on the bath modes ξ_j^(k) [J].
    pub bath_forcings: Array1<f64>,
    /// Constant energy offset N^(k), stored as rad/s (energy/ħ).
    pub constant_offset: f64,
    /// Absolute bath frequencies ω_j [rad/s].
    pub bath_frequencies: Array1<f64>,
    /// Exact bath detunings ω_j − ω [rad/s].
    pub bath_detunings: Array1<f64>,
    /// Grid spacing of the bath the branch was built from, when uniform.
    pub bath_spacing: Option<f64>,
}

impl BranchHamiltonian {
    /// Number of bath modes.
    pub fn bath_len(&self) -> usize {
        self.couplings.len()
    }

    /// Branch sign (−1)^k.
    pub fn sign(&self) -> f64 {
        if self.branch == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Signed frequency pull of branch k = 0: φ₀²E_J cos(φ_eff)/ħ [rad/s],
/// with the screening correction applied to the classical flux phase.
/// Branch k flips the sign. Shared by the branch builder and the scenario
/// presets so both derive bit-identical scales.
pub fn branch_frequency_pull(cfg: &PhysicalConfig) -> Result<f64> {
    let phi_eff = screening_phase(cfg.classical_flux_phase, cfg.screening_parameter)?;
    let p0 = phi0(cfg)?;
    Ok(p0 * p0 * cfg.josephson_energy * phi_eff.cos() / HBAR)
}

/// Magnitude of the branch frequency pull [rad/s]; the natural unit for
/// decay rates and time grids in the oscillating-decoherence regime.
pub fn branch_frequency_pull_magnitude(cfg: &PhysicalConfig) -> Result<f64> {
    Ok(branch_frequency_pull(cfg)?.abs())
}

/// Build the effective Hamiltonian of branch k for a calibrated bath.
///
/// The screening correction is applied to the classical flux phase before
/// any trigonometry, so a nonzero screening parameter shifts every
/// E_J-dependent term consistently.
pub fn build_branch(
    k: u8,
    cfg: &PhysicalConfig,
    bath: &DiscretizedBath,
) -> Result<BranchHamiltonian> {
    if k > 1 {
        return Err(Error::InvalidConfig(format!(
            "branch index must be 0 or 1, got {k}"
        )));
    }
    let phi_eff = screening_phase(cfg.classical_flux_phase, cfg.screening_parameter)?;
    let cos_phi = phi_eff.cos();
    let sin_phi = phi_eff.sin();
    let p0 = phi0(cfg)?;
    let e_j = cfg.josephson_energy;
    let omega = cfg.resonant_angular_frequency;
    let sign = if k == 0 { 1.0 } else { -1.0 };

    let pull = sign * (p0 * p0 * e_j * cos_phi / HBAR);
    let couplings = bath
        .phase_couplings
        .mapv(|phi| sign * (phi * p0 * e_j * cos_phi));
    let bath_forcings = bath.phase_couplings.mapv(|phi| sign * (phi * e_j * sin_phi));

    Ok(BranchHamiltonian {
        branch: k,
        shifted_frequency: omega + pull,
        frequency_pull: pull,
        frame_frequency: omega,
        couplings,
        resonant_forcing: sign * (p0 * e_j * sin_phi),
        bath_forcings,
        constant_offset: sign * ((p0 * p0 * e_j * cos_phi - e_j * cos_phi) / HBAR),
        bath_frequencies: bath.frequencies.clone(),
        bath_detunings: bath.detunings.clone(),
        bath_spacing: Some(bath.spacing),
    })
}

/// Non-fatal physics warnings for a configuration about to be simulated:
/// gate charge away from the degeneracy point the branch construction
/// assumes, and a flux phase large enough to strain the quadratic
/// expansion (φ₀·max(1, √n̄) ≥ 1e-3, with n̄ the initial photon number).
pub fn config_warnings(cfg: &PhysicalConfig, mean_photon_number: f64) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    if (cfg.gate_charge - 0.5).abs() > 1e-12 {
        warnings.push(format!(
            "gate_charge = {} deviates from the charge-degeneracy point 1/2 \
             assumed by the two-branch construction; background-charge terms \
             are not modeled",
            cfg.gate_charge
        ));
    }
    let p0 = phi0(cfg)?;
    let excursion = p0 * mean_photon_number.sqrt().max(1.0);
    if excursion >= WEAK_NONLINEARITY_LIMIT {
        warnings.push(format!(
            "flux-phase excursion φ₀·max(1,√n̄) = {excursion:.3e} exceeds \
             {WEAK_NONLINEARITY_LIMIT:.0e}; the quadratic expansion of the \
             Josephson cosine is strained"
        ));
    }
    Ok(warnings)
}

/// The displacement constants that cancel the linear forcing terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacements {
    /// Resonant-mode displacement λ (dimensionless).
    pub resonant: Complex64,
    /// Bath-mode displacements λ_j (dimensionless).
    pub bath: Array1<Complex64>,
    /// Scalar energy offset left after the displacement [J].
    pub scalar_offset: f64,
}

/// Solve for the displacements λ, λ_j that remove the linear terms of a
/// branch Hamiltonian.
///
/// Requiring the b† and b_j† coefficients to vanish after a ↦ b − λ,
/// a_j ↦ b_j − λ_j gives the linear system
///
///   ħΩλ + Σ_j g_jλ_j = iξ,      ħω_jλ_j + g_jλ = iξ_j,
///
/// eliminated in closed form through its Schur complement: with λ = iq,
///
///   q = (ξ − Σ_j g_jξ_j/(ħω_j)) / (ħΩ − Σ_j g_j²/(ħω_j)),
///
/// and λ_j = i(ξ_j − g_j q)/(ħω_j). Real forcings make every displacement
/// purely imaginary. Errors when the Schur denominator vanishes (the error
/// names it) or when a bath frequency is zero.
pub fn solve_displacements(h: &BranchHamiltonian) -> Result<Displacements> {
    let n = h.bath_len();
    if h.bath_forcings.len() != n || h.bath_frequencies.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "branch arrays disagree: {} couplings, {} forcings, {} frequencies",
            n,
            h.bath_forcings.len(),
            h.bath_frequencies.len()
        )));
    }
    let mut coupling_sum = 0.0; // Σ g_j²/(ħω_j)
    let mut forcing_sum = 0.0; // Σ g_jξ_j/(ħω_j)
    for j in 0..n {
        let h_omega_j = HBAR * h.bath_frequencies[j];
        if h_omega_j == 0.0 {
            return Err(Error::DegenerateForcing { denominator: 0.0 });
        }
        coupling_sum += h.couplings[j] * h.couplings[j] / h_omega_j;
        forcing_sum += h.couplings[j] * h.bath_forcings[j] / h_omega_j;
    }
    let denominator = HBAR * h.shifted_frequency - coupling_sum;
    if denominator == 0.0 {
        return Err(Error::DegenerateForcing { denominator });
    }
    let q = (h.resonant_forcing - forcing_sum) / denominator;

    let mut bath = Array1::from_elem(n, Complex64::new(0.0, 0.0));
    let mut forcing_dot = 0.0; // Σ ξ_j q_j
    for j in 0..n {
        let qj = (h.bath_forcings[j] - h.couplings[j] * q) / (HBAR * h.bath_frequencies[j]);
        bath[j] = Complex64::new(0.0, qj);
        forcing_dot += h.bath_forcings[j] * qj;
    }
    let scalar_offset = HBAR * h.constant_offset - h.resonant_forcing * q - forcing_dot;

    Ok(Displacements {
        resonant: Complex64::new(0.0, q),
        bath,
        scalar_offset,
    })
}

/// Expansion oracle for [`solve_displacements`]: substitute the displacement
/// back into the Hamiltonian and return the largest relative magnitude of a
/// surviving linear coefficient. Each channel is normalized by its own
/// largest contribution, so the result is scale-free; a correct solution
/// gives ≤ 1e-12.
pub fn displacement_residual(h: &BranchHamiltonian, d: &Displacements) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let mut worst: f64 = 0.0;

    // b† coefficient: iξ − ħΩλ − Σ g_jλ_j.
    let mut acc = i * h.resonant_forcing - HBAR * h.shifted_frequency * d.resonant;
    let mut scale = (h.resonant_forcing.abs()).max((HBAR * h.shifted_frequency * d.resonant).norm());
    for j in 0..h.bath_len() {
        acc -= h.couplings[j] * d.bath[j];
        scale = scale.max((h.couplings[j] * d.bath[j]).norm());
    }
    if scale > 0.0 {
        worst = worst.max(acc.norm() / scale);
    } else {
        worst = worst.max(acc.norm());
    }

    // b_j† coefficients: iξ_j − ħω_jλ_j − g_jλ.
    for j in 0..h.bath_len() {
        let freq_term = HBAR * h.bath_frequencies[j] * d.bath[j];
        let coupling_term = h.couplings[j] * d.resonant;
        let r = i * h.bath_forcings[j] - freq_term - coupling_term;
        let scale = h.bath_forcings[j]
            .abs()
            .max(freq_term.norm())
            .max(coupling_term.norm());
        if scale > 0.0 {
            worst = worst.max(r.norm() / scale);
        } else {
            worst = worst.max(r.norm());
        }
    }
    worst
}

/// Map qubit amplitudes from the charge basis to the σ_x eigenbasis
/// (|±⟩ = (|0⟩_q ± |1⟩_q)/√2). The map is its own inverse.
pub fn qubit_basis_transform(
    amplitudes: (Complex64, Complex64),
) -> Result<(Complex64, Complex64)> {
    let (a0, a1) = amplitudes;
    let norm_sq = a0.norm_sqr() + a1.norm_sqr();
    if norm_sq == 0.0 || !norm_sq.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "qubit amplitudes must form a normalizable state, got ({a0}, {a1})"
        )));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok((s * (a0 + a1), s * (a0 - a1)))
}
