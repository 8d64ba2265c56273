//! Brute-force truncated Fock-space evolver for tiny instances (resonant
//! mode plus at most three bath modes): a model-independent oracle for
//! coherent-state closure and for the mode-space pipeline's observables.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::constants::HBAR;
use crate::hamiltonian::BranchHamiltonian;
use crate::linalg::eigh_symmetric;
use crate::observables::{BathKind, InitialState, ResonantKind};
use crate::{Error, Result};

/// Largest bath the brute-force evolver accepts.
pub const MAX_BATH_MODES: usize = 3;
/// Hard cap on the truncated Hilbert-space dimension (n_max+1)^modes.
pub const MAX_TOTAL_DIMENSION: usize = 200_000;
/// Largest admissible coherent-state weight above the per-mode cutoff.
pub const COHERENT_TAIL_BOUND: f64 = 1e-8;
/// Largest admissible drift of the state norm over a run.
pub const NORM_DRIFT_BOUND: f64 = 1e-8;

/// A truncated Fock-space instance: per-mode cutoff plus the (small)
/// branch Hamiltonian to evolve under.
#[derive(Debug, Clone)]
pub struct FockConfig {
    /// Number of modes including the resonant one (1 + N_bath).
    pub mode_count: usize,
    /// Highest occupation kept per mode (n_max).
    pub per_mode_cutoff: usize,
    /// Branch Hamiltonian restricted to at most [`MAX_BATH_MODES`] modes.
    pub hamiltonian: BranchHamiltonian,
}

impl FockConfig {
    /// Build and validate a config; the mode count follows the Hamiltonian.
    pub fn new(per_mode_cutoff: usize, hamiltonian: BranchHamiltonian) -> Result<Self> {
        let fc = Self {
            mode_count: 1 + hamiltonian.bath_len(),
            per_mode_cutoff,
            hamiltonian,
        };
        fc.validate()?;
        Ok(fc)
    }

    /// Check the size guards and internal consistency.
    pub fn validate(&self) -> Result<()> {
        let bath = self.hamiltonian.bath_len();
        if self.mode_count != 1 + bath {
            return Err(Error::ShapeMismatch(format!(
                "mode_count = {} disagrees with 1 + {} bath modes",
                self.mode_count, bath
            )));
        }
        if bath > MAX_BATH_MODES {
            return Err(Error::InvalidConfig(format!(
                "brute-force evolver accepts at most {MAX_BATH_MODES} bath \
                 modes, got {bath}"
            )));
        }
        let levels = self.per_mode_cutoff as u128 + 1;
        let dim = levels.pow(self.mode_count as u32);
        if dim > MAX_TOTAL_DIMENSION as u128 {
            return Err(Error::InstanceTooLarge {
                dim: dim.min(usize::MAX as u128) as usize,
                limit: MAX_TOTAL_DIMENSION,
            });
        }
        Ok(())
    }

    /// Truncated Hilbert-space dimension (n_max+1)^modes.
    pub fn dimension(&self) -> usize {
        (self.per_mode_cutoff + 1).pow(self.mode_count as u32)
    }

    fn levels(&self) -> usize {
        self.per_mode_cutoff + 1
    }

    /// Row-major stride of a mode (resonant mode 0 varies slowest).
    fn stride(&self, mode: usize) -> usize {
        self.levels().pow((self.mode_count - 1 - mode) as u32)
    }

    /// Occupation of `mode` in basis state `index`.
    pub fn occupation_of(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.levels()
    }

    fn total_occupation(&self, index: usize) -> usize {
        (0..self.mode_count).map(|m| self.occupation_of(index, m)).sum()
    }
}

/// Truncated coherent-state column: e^{−|α|²/2} αⁿ/√(n!) up to the cutoff,
/// renormalized. Errors when the discarded weight exceeds the tail bound.
fn coherent_column(alpha: Complex64, n_max: usize) -> Result<Vec<Complex64>> {
    let mut column = Vec::with_capacity(n_max + 1);
    let mut term = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    let mut kept = 0.0;
    for n in 0..=n_max {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        kept += term.norm_sqr();
        column.push(term);
    }
    let tail = 1.0 - kept;
    if tail > COHERENT_TAIL_BOUND {
        return Err(Error::TruncationTail {
            tail,
            n_max,
            amp: alpha.norm(),
            bound: COHERENT_TAIL_BOUND,
        });
    }
    let norm = kept.sqrt();
    for c in &mut column {
        *c /= norm;
    }
    Ok(column)
}

/// Normalized product state of per-mode coherent amplitudes (resonant mode
/// first), truncated at the config cutoff.
pub fn coherent_product_state(
    fc: &FockConfig,
    amplitudes: &[Complex64],
) -> Result<Array1<Complex64>> {
    if amplitudes.len() != fc.mode_count {
        return Err(Error::ShapeMismatch(format!(
            "{} coherent amplitudes for {} modes",
            amplitudes.len(),
            fc.mode_count
        )));
    }
    let columns: Vec<Vec<Complex64>> = amplitudes
        .iter()
        .map(|&a| coherent_column(a, fc.per_mode_cutoff))
        .collect::<Result<_>>()?;
    let dim = fc.dimension();
    let mut state = Array1::from_elem(dim, Complex64::new(1.0, 0.0));
    for i in 0..dim {
        for (m, column) in columns.iter().enumerate() {
            state[i] *= column[fc.occupation_of(i, m)];
        }
    }
    Ok(state)
}

fn initial_vector(fc: &FockConfig, s: &InitialState) -> Result<Array1<Complex64>> {
    s.validate()?;
    let n_bath = fc.hamiltonian.bath_len();
    let resonant: Vec<Complex64> = match &s.resonant_kind {
        ResonantKind::Fock(n) => {
            let n = *n as usize;
            if n > fc.per_mode_cutoff {
                return Err(Error::InvalidConfig(format!(
                    "Fock occupancy {n} exceeds the per-mode cutoff {}",
                    fc.per_mode_cutoff
                )));
            }
            let mut col = vec![Complex64::new(0.0, 0.0); fc.per_mode_cutoff + 1];
            col[n] = Complex64::new(1.0, 0.0);
            col
        }
        ResonantKind::Coherent(a) => coherent_column(*a, fc.per_mode_cutoff)?,
    };
    let mut columns = vec![resonant];
    match &s.bath_kind {
        BathKind::Vacuum => {
            for _ in 0..n_bath {
                let mut col = vec![Complex64::new(0.0, 0.0); fc.per_mode_cutoff + 1];
                col[0] = Complex64::new(1.0, 0.0);
                columns.push(col);
            }
        }
        BathKind::Coherent(amps) => {
            if amps.len() != n_bath {
                return Err(Error::ShapeMismatch(format!(
                    "{} bath amplitudes for {} bath modes",
                    amps.len(),
                    n_bath
                )));
            }
            for &a in amps {
                columns.push(coherent_column(a, fc.per_mode_cutoff)?);
            }
        }
    }
    let dim = fc.dimension();
    let mut state = Array1::from_elem(dim, Complex64::new(1.0, 0.0));
    for i in 0..dim {
        for (m, column) in columns.iter().enumerate() {
            state[i] *= column[fc.occupation_of(i, m)];
        }
    }
    Ok(state)
}

/// Gauged Hamiltonian matrix H/ħ in the occupation basis.
///
/// The linear drive iξ(b† − b) has imaginary matrix elements; conjugating
/// by G = diag(i^{total occupation}) maps them to real ones and leaves the
/// (already real) diagonal and hopping blocks alone, so the full matrix
/// becomes real symmetric and a symmetric eigensolver applies.
fn gauged_matrix(fc: &FockConfig) -> Array2<f64> {
    let h = &fc.hamiltonian;
    let dim = fc.dimension();
    let n_max = fc.per_mode_cutoff;
    let mut m = Array2::<f64>::zeros((dim, dim));
    for i in 0..dim {
        let n0 = fc.occupation_of(i, 0);
        let mut diag = h.shifted_frequency * n0 as f64 + h.constant_offset;
        for j in 0..h.bath_len() {
            diag += h.bath_frequencies[j] * fc.occupation_of(i, 1 + j) as f64;
        }
        m[(i, i)] = diag;

        // Drive terms: gauged i·ξ_m(b† − b)/ħ → −(ξ_m/ħ)·√(n+1) between
        // neighbors in mode m.
        for mode in 0..fc.mode_count {
            let occ = fc.occupation_of(i, mode);
            if occ < n_max {
                let xi = if mode == 0 {
                    h.resonant_forcing
                } else {
                    h.bath_forcings[mode - 1]
                };
                if xi != 0.0 {
                    let target = i + fc.stride(mode);
                    let value = -(xi / HBAR) * ((occ + 1) as f64).sqrt();
                    m[(target, i)] += value;
                    m[(i, target)] += value;
                }
            }
        }

        // Beam-splitter couplings g_j(b†b_j + b_j†b)/ħ; each unordered pair
        // of basis states is visited once, from its lower-n₀ member.
        for j in 0..h.bath_len() {
            let occ_b = fc.occupation_of(i, 1 + j);
            if n0 < n_max && occ_b > 0 {
                let target = i + fc.stride(0) - fc.stride(1 + j);
                let value = (h.couplings[j] / HBAR)
                    * ((n0 + 1) as f64).sqrt()
                    * (occ_b as f64).sqrt();
                m[(target, i)] += value;
                m[(i, target)] += value;
            }
        }
    }
    m
}

/// One brute-force evolution: normalized states on the requested grid plus
/// the worst norm drift the renormalization absorbed.
#[derive(Debug, Clone)]
pub struct FockEvolution {
    pub times: Vec<f64>,
    pub states: Vec<Array1<Complex64>>,
    pub norm_drift: f64,
}

/// Evolve an initial product state under the truncated branch Hamiltonian
/// by direct Hermitian eigendecomposition of the (gauged) matrix.
pub fn evolve_state(fc: &FockConfig, s: &InitialState, times: &[f64]) -> Result<FockEvolution> {
    fc.validate()?;
    let psi0 = initial_vector(fc, s)?;
    let dim = fc.dimension();

    let gauge: Vec<Complex64> = (0..dim)
        .map(|i| match fc.total_occupation(i) % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        })
        .collect();

    let matrix = gauged_matrix(fc);
    let (energies, vectors) = eigh_symmetric(&matrix)?;
    drop(matrix);

    // Eigenbasis weights of the gauged initial state: w = Vᵀ·(G·ψ0).
    let g_re = Array1::from_iter((0..dim).map(|i| (gauge[i] * psi0[i]).re));
    let g_im = Array1::from_iter((0..dim).map(|i| (gauge[i] * psi0[i]).im));
    let w_re = vectors.t().dot(&g_re);
    let w_im = vectors.t().dot(&g_im);

    // Batched phase application: column τ of B holds e^{−iE t_τ} ∘ w.
    let n_t = times.len();
    let mut b_re = Array2::<f64>::zeros((dim, n_t));
    let mut b_im = Array2::<f64>::zeros((dim, n_t));
    for (tau, &t) in times.iter().enumerate() {
        for d in 0..dim {
            let (sin, cos) = (energies[d] * t).sin_cos();
            b_re[(d, tau)] = cos * w_re[d] + sin * w_im[d];
            b_im[(d, tau)] = cos * w_im[d] - sin * w_re[d];
        }
    }
    let psi_re = vectors.dot(&b_re);
    let psi_im = vectors.dot(&b_im);

    let mut states = Vec::with_capacity(n_t);
    let mut drift: f64 = 0.0;
    for tau in 0..n_t {
        let mut state = Array1::from_iter(
            (0..dim).map(|i| gauge[i].conj() * Complex64::new(psi_re[(i, tau)], psi_im[(i, tau)])),
        );
        let norm = state.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        drift = drift.max((norm - 1.0).abs());
        state.mapv_inplace(|c| c / norm);
        states.push(state);
    }
    if drift > NORM_DRIFT_BOUND {
        return Err(Error::Linalg(format!(
            "brute-force evolution lost unitarity: norm drift {drift:.3e} \
             exceeds {NORM_DRIFT_BOUND:.0e}"
        )));
    }
    Ok(FockEvolution {
        times: times.to_vec(),
        states,
        norm_drift: drift,
    })
}

/// Mean occupation ⟨a_m†a_m⟩ of one mode.
pub fn mode_occupation(fc: &FockConfig, state: &Array1<Complex64>, mode: usize) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(i, c)| fc.occupation_of(i, mode) as f64 * c.norm_sqr())
        .sum()
}

/// |⟨a|b⟩| of two state vectors on the same truncated space.
pub fn overlap_magnitude(a: &Array1<Complex64>, b: &Array1<Complex64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "overlap of vectors with {} and {} entries",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        .norm())
}

/// Coherent amplitude ⟨a_m⟩ of one mode.
pub fn coherent_amplitude(fc: &FockConfig, state: &Array1<Complex64>, mode: usize) -> Complex64 {
    let stride = fc.stride(mode);
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, c) in state.iter().enumerate() {
        let occ = fc.occupation_of(i, mode);
        if occ < fc.per_mode_cutoff {
            acc += c.conj() * ((occ + 1) as f64).sqrt() * state[i + stride];
        }
    }
    acc
}

/// Evolve a coherent input and report the worst infidelity against the
/// nearest coherent product state (amplitudes read off as ⟨a_m⟩).
///
/// Number-conserving quadratic Hamiltonians with linear drives map coherent
/// products to coherent products, so the deviation measures truncation and
/// solver error only.
pub fn coherent_closure_check(fc: &FockConfig, alpha: Complex64, times: &[f64]) -> Result<f64> {
    let s = InitialState::coherent_vacuum(alpha);
    let evolution = evolve_state(fc, &s, times)?;
    let mut worst: f64 = 0.0;
    for state in &evolution.states {
        let amplitudes: Vec<Complex64> = (0..fc.mode_count)
            .map(|m| coherent_amplitude(fc, state, m))
            .collect();
        let candidate = coherent_product_state(fc, &amplitudes)?;
        let fidelity = overlap_magnitude(&candidate, state)?.powi(2);
        worst = worst.max(1.0 - fidelity);
    }
    Ok(worst)
}
