// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Propagator coefficients of one branch Hamiltonian, by two independent
//! routes.
//!
//! In the Heisenberg picture the displaced operators evolve linearly,
//!
//!   b(t)  = u(t) b(0) + Σ_j v_j(t) b_j(0),
//!   b_j(t) = e^{−iω_jt} b_j(0) + u_j(t) b(0) + Σ_s v_{j,s}(t) b_s(0),
//!
//! and everything observable is a function of the coefficient arrays u, v_j,
//! u_j, v_{j,s}. [`analytic_coefficients`] evaluates the damped closed-form
//! solution (a Weisskopf–Wigner pole approximation with decay rate γ);
//! [`exact_coefficients`] diagonalizes the single-excitation mode matrix,
//! which is exact to rounding for the discrete model and serves as the
//! oracle for the closed form.
//!
//! ## Rotating frame
//!
//! All stored coefficients are in the frame rotating at the branch's
//! `frame_frequency` ω: the lab-frame coefficient is e^{−iωt} times the
//! stored one. Phases then involve only offset-space frequencies (pulls and
//! detunings of order 1 rad/s), never the 2e11 rad/s carrier, which keeps
//! every phase accurate to rounding over the full simulated horizon. All
//! magnitudes, overlaps, and occupation numbers are frame-invariant.

use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::hamiltonian::BranchHamiltonian;
use crate::linalg::eigh_symmetric;

/// Largest dense mode matrix the exact route will diagonalize.
pub const MAX_EXACT_DIMENSION: usize = 8192;

/// Largest bath for which the O(N²)-per-sample bath-bath tensor may be
/// requested.
pub const MAX_BATH_BATH_MODES: usize = 64;

/// GEMM chunk width (time samples per block) for the exact route.
const TIME_CHUNK: usize = 256;

/// Which construction produced a coefficient set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientSource {
    /// Damped closed-form solution (pole approximation).
    Analytic,
    /// Eigendecomposition of the single-excitation mode matrix.
    Exact,
}

/// Time series of the Heisenberg propagation coefficients of one branch,
/// stored in the rotating frame (see module docs).
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorCoefficients {
    /// Sample times [s].
    pub times: Array1<f64>,
    /// Resonant-mode survival amplitude u(t).
    pub u: Array1<Complex64>,
    /// Resonant-into-bath amplitudes v_j(t); shape time × bath.
    pub v: Array2<Complex64>,
    /// Bath-into-bath corrections v_{j,s}(t) (free phase excluded); shape
    /// time × j × s. Computed only on request and only for small baths.
    pub v_bath_bath: Option<Array3<Complex64>>,
    /// Construction route.
    pub source: CoefficientSource,
    /// Rotating-frame reference ω [rad/s]; lab frame = e^{−iωt} × stored.
    pub frame_frequency: f64,
}

impl PropagatorCoefficients {
    /// Bath-into-resonant amplitudes u_j(t). The closed-form solution gives
    /// u_j and v_j as the same expression, and the exact route's symmetric
    /// mode matrix makes the identity hold to rounding, so the same array
    /// serves both roles.
    pub fn u_into_bath(&self) -> &Array2<Complex64> {
        &self.v
    }

    /// Σ_j |v_j(t)|² at one time index.
    pub fn bath_norm_squared(&self, time_index: usize) -> f64 {
        self.v.row(time_index).iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest deviation of |u|² + Σ_j|v_j|² from 1 over all samples.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, u) in self.u.iter().enumerate() {
            let total = u.norm_sqr() + self.bath_norm_squared(i);
            worst = worst.max((total - 1.0).abs());
        }
        worst
    }
}

/// Validate a sample-time grid: finite, nonnegative, strictly increasing.
pub fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidConfig("time grid is empty".into()));
    }
    if !times[0].is_finite() || times[0] < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "times must be nonnegative and finite, first is {}",
            times[0]
        )));
    }
    for i in 1..times.len() {
        if !times[i].is_finite() || times[i] <= times[i - 1] {
            return Err(Error::InvalidConfig(format!(
                "times must be strictly increasing; times[{}] = {} after {}",
                i,
                times[i],
                times[i - 1]
            )));
        }
    }
    Ok(())
}

/// e^{−iθ} without going through a complex exponential.
#[inline]
pub(crate) fn phase(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, -s)
}

/// (1 − e^{−ixt − γt/2}) / (x − iγ/2), the resolvent factor of the damped
/// solution; its x, γ → 0 limit is it.
#[inline]
fn resolvent_factor(x: f64, gamma: f64, t: f64) -> Complex64 {
    let denom = Complex64::new(x, -0.5 * gamma);
    if denom == Complex64::new(0.0, 0.0) {
        return Complex64::new(0.0, t);
    }
    let numer = Complex64::new(1.0, 0.0) - phase(x * t) * (-0.5 * gamma * t).exp();
    numer / denom
}

/// Closed-form damped propagation coefficients.
///
/// `gamma` is the resonant-mode decay rate and `lamb_shift` the bath-induced
/// frequency shift ΔΩ; both enter through the pulled frequency
/// Ω̃ − ω = `h.frequency_pull` + ΔΩ. With g̃_j = g_j/ħ and x_j = (Ω̃ − ω) −
/// (ω_j − ω):
///
///   u(t)   = e^{−γt/2} e^{−i(Ω̃−ω)t},
///   v_j(t) = −g̃_j e^{−i(ω_j−ω)t} · R(x_j),      R(x) = (1 − e^{−ixt−γt/2})/(x − iγ/2),
///   v_{j,s}(t) = −g̃_j g̃_s e^{−i(ω_j−ω)t} (R(x_j) + Λ)/(x_s − iγ/2),
///
/// with the kernel factor Λ = t when s = j and
/// Λ = (e^{−i(ω_s−ω_j)t} − 1)/(ω_s − ω_j) otherwise — implemented exactly as
/// printed in the source solution. The s = j kernel is inconsistent with the
/// s → j limit of the off-diagonal branch (−it); see the tests, which
/// demonstrate the discrepancy against direct integration.
pub fn analytic_coefficients(
    h: &BranchHamiltonian,
    gamma: f64,
    lamb_shift: f64,
    times: &[f64],
    with_bath_bath: bool,
) -> Result<PropagatorCoefficients> {
    check_times(times)?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "decay rate must be nonnegative and finite, got {gamma}"
        )));
    }
    let n = h.bath_len();
    let n_t = times.len();
    let pulled = h.frequency_pull + lamb_shift;

    let g_over_hbar: Vec<f64> = h.couplings.iter().map(|g| g / HBAR).collect();
    let mut u = Array1::from_elem(n_t, Complex64::new(0.0, 0.0));
    let mut v = Array2::from_elem((n_t, n), Complex64::new(0.0, 0.0));
    for (i, &t) in times.iter().enumerate() {
        let damp = (-0.5 * gamma * t).exp();
        u[i] = phase(pulled * t) * damp;
        for j in 0..n {
            let det_j = h.bath_detunings[j];
            let x_j = pulled - det_j;
            v[(i, j)] = -g_over_hbar[j] * phase(det_j * t) * resolvent_factor(x_j, gamma, t);
        }
    }

    let v_bath_bath = if with_bath_bath {
        if n > MAX_BATH_BATH_MODES {
            return Err(Error::InstanceTooLarge {
                dim: n,
                limit: MAX_BATH_BATH_MODES,
            });
        }
        let mut w = Array3::from_elem((n_t, n, n), Complex64::new(0.0, 0.0));
        for (i, &t) in times.iter().enumerate() {
            for j in 0..n {
                let det_j = h.bath_detunings[j];
                let front_j = phase(det_j * t);
                let x_factor = resolvent_factor(pulled - det_j, gamma, t);
                for s in 0..n {
                    let det_s = h.bath_detunings[s];
                    let denom_s = Complex64::new(pulled - det_s, -0.5 * gamma);
                    if denom_s == Complex64::new(0.0, 0.0) {
                        return Err(Error::InvalidConfig(format!(
                            "bath-bath closed form diverges: pulled frequency \
                             degenerate with bath mode {s} at zero decay"
                        )));
                    }
                    let kernel = if s == j {
                        Complex64::new(t, 0.0)
                    } else {
                        let y = det_s - det_j;
                        if y == 0.0 {
                            // Degenerate off-diagonal grid points: use the
                            // continuous limit of the difference quotient.
                            Complex64::new(0.0, -t)
                        } else {
                            (phase(y * t) - Complex64::new(1.0, 0.0)) / y
                        }
                    };
                    w[(i, j, s)] = -g_over_hbar[j] * g_over_hbar[s] * front_j
                        * (x_factor + kernel)
                        / denom_s;
                }
            }
        }
        Some(w)
    } else {
        None
    };

    Ok(PropagatorCoefficients {
        times: Array1::from_iter(times.iter().cloned()),
        u,
        v,
        v_bath_bath,
        source: CoefficientSource::Analytic,
        frame_frequency: h.frame_frequency,
    })
}

/// Exact propagation coefficients by eigendecomposition of the
/// single-excitation mode matrix.
///
/// The quadratic Hamiltonian restricted to one excitation is the real
/// symmetric matrix (in the rotating frame, units rad/s)
///
///   A₀₀ = Ω − ω,  A_jj = ω_j − ω,  A₀j = A_j0 = g_j/ħ,
///
/// and the coefficient matrix is exp(−iAt): u = [exp(−iAt)]₀₀,
/// v_j = [exp(−iAt)]_j0, v_{j,s} = [exp(−iAt)]_js − δ_js e^{−i(ω_j−ω)t}.
/// Symmetry of A gives u_j = v_j identically. Exact to rounding at any t;
/// used as the oracle for the closed form.
pub fn exact_coefficients(
    h: &BranchHamiltonian,
    times: &[f64],
    with_bath_bath: bool,
) -> Result<PropagatorCoefficients> {
    check_times(times)?;
    let n = h.bath_len();
    let dim = n + 1;
    if dim > MAX_EXACT_DIMENSION {
        return Err(Error::InstanceTooLarge {
            dim,
            limit: MAX_EXACT_DIMENSION,
        });
    }
    if with_bath_bath && n > MAX_BATH_BATH_MODES {
        return Err(Error::InstanceTooLarge {
            dim: n,
            limit: MAX_BATH_BATH_MODES,
        });
    }
    let n_t = times.len();

    let mut matrix = Array2::zeros((dim, dim));
    matrix[(0, 0)] = h.frequency_pull;
    for j in 0..n {
        let g = h.couplings[j] / HBAR;
        matrix[(0, j + 1)] = g;
        matrix[(j + 1, 0)] = g;
        matrix[(j + 1, j + 1)] = h.bath_detunings[j];
    }
    let (eigenvalues, eigenvectors) = eigh_symmetric(&matrix)?;
    drop(matrix);

    // weights[m, c] = V[0, m]·V[c, m]: the spectral weight of eigenmode m in
    // the (0 → c) propagation amplitude. coeff[t, c] = Σ_m e^{−iE_m t}·weights.
    let mut weights = eigenvectors.t().to_owned();
    for m in 0..dim {
        let head = eigenvectors[(0, m)];
        weights.row_mut(m).mapv_inplace(|x| head * x);
    }

    let mut u = Array1::from_elem(n_t, Complex64::new(0.0, 0.0));
    let mut v = Array2::from_elem((n_t, n), Complex64::new(0.0, 0.0));
    let mut chunk_start = 0usize;
    while chunk_start < n_t {
        let chunk_end = (chunk_start + TIME_CHUNK).min(n_t);
        let rows = chunk_end - chunk_start;
        let mut phases_re = Array2::zeros((rows, dim));
        let mut phases_im = Array2::zeros((rows, dim));
        for r in 0..rows {
            let t = times[chunk_start + r];
            for m in 0..dim {
                let (s, c) = (eigenvalues[m] * t).sin_cos();
                phases_re[(r, m)] = c;
                phases_im[(r, m)] = -s;
            }
        }
        let coeff_re = phases_re.dot(&weights);
        let coeff_im = phases_im.dot(&weights);
        for r in 0..rows {
            u[chunk_start + r] = Complex64::new(coeff_re[(r, 0)], coeff_im[(r, 0)]);
            for j in 0..n {
                v[(chunk_start + r, j)] =
                    Complex64::new(coeff_re[(r, j + 1)], coeff_im[(r, j + 1)]);
            }
        }
        chunk_start = chunk_end;
    }

    let v_bath_bath = if with_bath_bath {
        let mut w = Array3::from_elem((n_t, n, n), Complex64::new(0.0, 0.0));
        for (i, &t) in times.iter().enumerate() {
            for j in 0..n {
                for s in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for m in 0..dim {
                        acc += eigenvectors[(j + 1, m)]
                            * eigenvectors[(s + 1, m)]
                            * phase(eigenvalues[m] * t);
                    }
                    if s == j {
                        acc -= phase(h.bath_detunings[j] * t);
                    }
                    w[(i, j, s)] = acc;
                }
            }
        }
        Some(w)
    } else {
        None
    };

    Ok(PropagatorCoefficients {
        times: Array1::from_iter(times.iter().cloned()),
        u,
        v,
        v_bath_bath,
        source: CoefficientSource::Exact,
        frame_frequency: h.frame_frequency,
    })
}

/// Anti-Heisenberg coefficients: elementwise complex conjugate of every
/// coefficient array; times, source, and frame are unchanged.
pub fn conjugate_coefficients(p: &PropagatorCoefficients) -> PropagatorCoefficients {
    PropagatorCoefficients {
        times: p.times.clone(),
        u: p.u.mapv(|c| c.conj()),
        v: p.v.mapv(|c| c.conj()),
        v_bath_bath: p.v_bath_bath.as_ref().map(|w| w.mapv(|c| c.conj())),
        source: p.source,
        frame_frequency: p.frame_frequency,
    }
}

/// Relative half-spacing below which a bath mode counts as the resonant
/// grid point and is excluded from the principal-value sum.
const LAMB_SKIP_FRACTION: f64 = 1e-6;

/// Second-order bath-induced shift of the branch frequency:
/// ΔΩ = Σ_j (g_j/ħ)² / (Ω − ω_j), skipping any grid point within
/// 1e-6·Δω of the branch frequency (the principal-value prescription for
/// the discretized continuum). Computed entirely in offset space.
pub fn lamb_shift(h: &BranchHamiltonian, bath: &crate::bath::DiscretizedBath) -> Result<f64> {
    if h.bath_len() != bath.len() {
        return Err(Error::ShapeMismatch(format!(
            "branch has {} modes but bath has {}",
            h.bath_len(),
            bath.len()
        )));
    }
    let tolerance = LAMB_SKIP_FRACTION * bath.spacing;
    let mut sum = 0.0;
    for j in 0..h.bath_len() {
        let distance = h.frequency_pull - h.bath_detunings[j];
        if distance.abs() <= tolerance {
            continue;
        }
        let g = h.couplings[j] / HBAR;
        sum += g * g / distance;
    }
    Ok(sum)
}
