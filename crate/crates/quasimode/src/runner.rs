// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Orchestration: resolve a scenario into a calibrated bath and branch
//! Hamiltonians, execute the requested computation routes, and emit the
//! CSV artifacts (results, bath, coefficient summary) atomically.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;

use crate::bath::{discretize, golden_rule_rate, DiscretizedBath};
use crate::dynamics::{exact_coefficients, lamb_shift};
use crate::fockcheck::{self, FockConfig};
use crate::hamiltonian::{
    build_branch, displacement_residual, solve_displacements, BranchHamiltonian,
};
use crate::observables::{
    decoherence_closed_form, decoherence_exact, forcing_offset, photon_number, short_time_rate,
    BathKind, ResonantKind, RunResult,
};
use crate::physparams::{phi0, screening_phase};
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Exact-route unitarity gate used by the validation report.
pub const UNITARITY_DEFECT_BOUND: f64 = 1e-10;
/// Linear-term cancellation gate used by the validation report.
pub const DISPLACEMENT_RESIDUAL_BOUND: f64 = 1e-12;
/// Relative golden-rule calibration gate used by the validation report.
pub const CALIBRATION_REL_BOUND: f64 = 1e-12;
/// Closed-form vs exact-overlap agreement gate used by the validation report.
pub const ROUTE_AGREEMENT_BOUND: f64 = 2e-2;
/// Golden-rule rates below this fraction of the target count as zero
/// coupling; time scales then fall back to the target decay.
pub const ZERO_COUPLING_FRACTION: f64 = 1e-12;

/// Per-branch propagator summary kept after the (large) coefficient arrays
/// are dropped: resonant amplitude, bath norm, and worst unitarity defect.
#[derive(Debug, Clone)]
pub struct CoefficientSummary {
    pub u: [Vec<Complex64>; 2],
    pub bath_norm_squared: [Vec<f64>; 2],
    pub unitarity_defect: [f64; 2],
}

/// Outcome of the brute-force cross-check route.
#[derive(Debug, Clone, Copy)]
pub struct FockReport {
    /// Worst |⟨a†a⟩_fock − n_exact| over the grid (branch 0).
    pub occupancy_gap: f64,
    /// Worst ||⟨ψ₁|ψ₀⟩| − D_exact|, when the overlap route ran.
    pub overlap_gap: Option<f64>,
    /// Worst state-norm drift across both branch evolutions.
    pub norm_drift: f64,
}

/// Everything one simulation produced, plus the derived context needed to
/// audit it (calibrated bath, branches, rates, frequency shifts).
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
    /// Calibration target γ [rad/s] (override or ω/Q).
    pub gamma_target: f64,
    /// Actual golden-rule decay of the branch couplings [rad/s]; equals the
    /// target only at the zero-flux-phase calibration reference.
    pub gamma_effective: f64,
    pub bath: DiscretizedBath,
    pub branches: [BranchHamiltonian; 2],
    pub lamb_shifts: [f64; 2],
    pub result: RunResult,
    pub coefficients: Option<CoefficientSummary>,
    pub fock: Option<FockReport>,
    /// Files written by [`run`]; empty for [`simulate`].
    pub written: Vec<PathBuf>,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Stable 64-bit hash of the canonical config rendering; recorded in the
/// manifest so outputs can be traced back to their exact inputs.
pub fn config_hash(sc: &Scenario) -> u64 {
    fnv1a64(sc.to_config_string().as_bytes())
}

fn linspace(t_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| t_max * i as f64 / (n - 1) as f64)
        .collect()
}

/// Execute a scenario in memory: calibrate, build both branches, run the
/// selected routes, and assemble the results table plus manifest. Performs
/// no file I/O.
pub fn simulate(sc: &Scenario) -> Result<SimulationOutput> {
    let warnings = sc.validate()?;
    let gamma_target = sc
        .gamma_override
        .unwrap_or_else(|| sc.physical.q_derived_decay());
    let (gamma_source, gamma_source_note) = match sc.gamma_override {
        Some(_) => ("override", "gamma_override_rad_s"),
        None => ("quality_factor", "omega / Q"),
    };
    let spec = sc.bath.resolve(gamma_target)?;
    let bath = discretize(&spec, &sc.physical)?;
    let h0 = build_branch(0, &sc.physical, &bath)?;
    let h1 = build_branch(1, &sc.physical, &bath)?;

    let golden_rule = golden_rule_rate(
        &bath,
        h0.couplings
            .as_slice()
            .expect("branch couplings are contiguous"),
    )?;
    let zero_coupling = golden_rule <= ZERO_COUPLING_FRACTION * gamma_target;
    let (gamma_effective, gamma_effective_source) = if zero_coupling {
        (gamma_target, "target_fallback")
    } else {
        (golden_rule, "golden_rule")
    };

    let lamb0 = lamb_shift(&h0, &bath)?;
    let lamb1 = lamb_shift(&h1, &bath)?;
    let shifted = [h0.shifted_frequency + lamb0, h1.shifted_frequency + lamb1];

    let t_max = sc.time_grid.t_max_over_gamma / gamma_effective;
    bath.check_horizon(t_max)?;
    let times = linspace(t_max, sc.time_grid.sample_count);

    let mut notes: Vec<(String, String)> = Vec::new();

    // Exact route: mode-matrix propagation, displaced-picture observables.
    let (photon, forcing, decoherence_exact_col, coefficients) = if sc.routes.exact {
        let d0 = solve_displacements(&h0)?;
        let d1 = solve_displacements(&h1)?;
        let p0 = exact_coefficients(&h0, &times, false)?;
        let p1 = exact_coefficients(&h1, &times, false)?;
        let photon0 = photon_number(&p0, &d0, &sc.initial)?;
        let photon1 = photon_number(&p1, &d1, &sc.initial)?;
        let f = forcing_offset(&p0, &d0, &sc.initial)?;
        let d_exact = match (&sc.initial.resonant_kind, &sc.initial.bath_kind) {
            (ResonantKind::Coherent(_), BathKind::Vacuum) => {
                Some(decoherence_exact(&p0, &p1, &sc.initial)?)
            }
            _ => {
                notes.push((
                    "decoherence_exact".into(),
                    "skipped: the overlap route needs a coherent state over \
                     a vacuum bath"
                        .into(),
                ));
                None
            }
        };
        let summary = CoefficientSummary {
            u: [p0.u.to_vec(), p1.u.to_vec()],
            bath_norm_squared: [
                (0..times.len()).map(|i| p0.bath_norm_squared(i)).collect(),
                (0..times.len()).map(|i| p1.bath_norm_squared(i)).collect(),
            ],
            unitarity_defect: [p0.unitarity_defect(), p1.unitarity_defect()],
        };
        notes.push(("photon_model".into(), "mean_channel_exact".into()));
        notes.push(("forcing_offset_model".into(), "branch_0_exact".into()));
        ([photon0, photon1], f, d_exact, Some(summary))
    } else {
        // Without propagator coefficients the photon column falls back to
        // the dissipation envelope n̄·e^{−γt} (γ = 0 when the couplings
        // vanish) and the forcing offset to its drive-free value 0.
        let occupancy = sc.initial.mean_resonant_occupancy();
        let decay = if zero_coupling { 0.0 } else { gamma_effective };
        let envelope: Vec<f64> = times.iter().map(|&t| occupancy * (-decay * t).exp()).collect();
        notes.push(("photon_model".into(), "decay_envelope".into()));
        notes.push(("forcing_offset_model".into(), "zero_envelope_run".into()));
        (
            [envelope.clone(), envelope],
            vec![0.0; times.len()],
            None,
            None,
        )
    };

    // Closed-form route: oscillating-decay overlap formula.
    let closed_split = sc
        .closed_form_detuning_override
        .unwrap_or(shifted[1] - shifted[0]);
    let decoherence_closed_col = if sc.routes.closed_form {
        match (&sc.initial.resonant_kind, &sc.initial.bath_kind) {
            (ResonantKind::Coherent(alpha), BathKind::Vacuum) => {
                if zero_coupling {
                    // γ → 0 limit of the closed form: pure dephasing by the
                    // branch split, no dissipative envelope.
                    notes.push((
                        "decoherence_closed".into(),
                        "undamped limit: couplings vanish".into(),
                    ));
                    let weight = alpha.norm_sqr();
                    Some(
                        times
                            .iter()
                            .map(|&t| (-weight * (1.0 - (closed_split * t).cos())).exp())
                            .collect(),
                    )
                } else {
                    Some(decoherence_closed_form(
                        0.0,
                        closed_split,
                        gamma_effective,
                        *alpha,
                        &times,
                    )?)
                }
            }
            _ => {
                notes.push((
                    "decoherence_closed".into(),
                    "skipped: needs a coherent state over a vacuum bath".into(),
                ));
                None
            }
        }
    } else {
        None
    };

    // Brute-force cross-check route (tiny baths only; the config guards
    // guarantee `exact` ran and the initial state is well formed).
    let fock = if sc.routes.fock {
        let fc0 = FockConfig::new(sc.fock_cutoff, h0.clone())?;
        let fc1 = FockConfig::new(sc.fock_cutoff, h1.clone())?;
        let e0 = fockcheck::evolve_state(&fc0, &sc.initial, &times)?;
        let e1 = fockcheck::evolve_state(&fc1, &sc.initial, &times)?;
        let mut occupancy_gap: f64 = 0.0;
        for (i, state) in e0.states.iter().enumerate() {
            let occ = fockcheck::mode_occupation(&fc0, state, 0);
            occupancy_gap = occupancy_gap.max((occ - photon[0][i]).abs());
        }
        let overlap_gap = match &decoherence_exact_col {
            Some(d) => {
                let mut worst: f64 = 0.0;
                for i in 0..times.len() {
                    let overlap =
                        fockcheck::overlap_magnitude(&e1.states[i], &e0.states[i])?;
                    worst = worst.max((overlap - d[i]).abs());
                }
                Some(worst)
            }
            None => None,
        };
        Some(FockReport {
            occupancy_gap,
            overlap_gap,
            norm_drift: e0.norm_drift.max(e1.norm_drift),
        })
    } else {
        None
    };

    // Manifest: enough provenance to reproduce and audit the run. Every
    // defaulted, source-unstated parameter is recorded (flux phase, decay
    // source, loop area, calibration scalar, frequency shifts).
    let phi_eff = screening_phase(
        sc.physical.classical_flux_phase,
        sc.physical.screening_parameter,
    )?;
    let mut manifest: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: String| manifest.push((k.to_string(), v));
    push("format_version", "1".into());
    push("config_hash", format!("{:016x}", config_hash(sc)));
    push(
        "resonant_angular_frequency_rad_s",
        format!("{:.16e}", sc.physical.resonant_angular_frequency),
    );
    push(
        "classical_flux_phase_rad",
        format!("{:.16e}", sc.physical.classical_flux_phase),
    );
    push("effective_flux_phase_rad", format!("{phi_eff:.16e}"));
    push(
        "screening_parameter",
        format!("{:.16e}", sc.physical.screening_parameter),
    );
    push("squid_area_m2", format!("{:.16e}", sc.physical.squid_area));
    push("mode_volume_m3", format!("{:.16e}", sc.physical.mode_volume));
    push("zero_point_phase", format!("{:.16e}", phi0(&sc.physical)?));
    push("gamma_target_rad_s", format!("{gamma_target:.16e}"));
    push(
        "gamma_target_source",
        format!("{gamma_source} ({gamma_source_note})"),
    );
    push("gamma_effective_rad_s", format!("{gamma_effective:.16e}"));
    push("gamma_effective_source", gamma_effective_source.into());
    push(
        "calibration_scalar",
        format!("{:.16e}", bath.calibration_scalar),
    );
    push("bath_mode_count", format!("{}", bath.len()));
    push(
        "bath_half_bandwidth_rad_s",
        format!("{:.16e}", spec.half_bandwidth),
    );
    push("bath_spacing_rad_s", format!("{:.16e}", bath.spacing));
    push("bath_revival_time_s", format!("{:.16e}", bath.revival_time()));
    push(
        "frequency_pull_k0_rad_s",
        format!("{:.16e}", h0.frequency_pull),
    );
    push("lamb_shift_k0_rad_s", format!("{lamb0:.16e}"));
    push("lamb_shift_k1_rad_s", format!("{lamb1:.16e}"));
    push("closed_form_split_rad_s", format!("{closed_split:.16e}"));
    if sc.closed_form_detuning_override.is_some() {
        push("closed_form_split_source", "override".into());
    } else {
        push("closed_form_split_source", "branch_frequencies".into());
    }
    let initial_desc = match &sc.initial.resonant_kind {
        ResonantKind::Coherent(a) => format!("coherent alpha = {:.16e}", a.re),
        ResonantKind::Fock(n) => format!("fock n = {n}"),
    };
    push("initial_state", initial_desc);
    push("qubit_preparation", "equal superposition".into());
    push("t_max_s", format!("{t_max:.16e}"));
    push("sample_count", format!("{}", sc.time_grid.sample_count));
    let mut route_names = Vec::new();
    if sc.routes.closed_form {
        route_names.push("closed_form");
    }
    if sc.routes.exact {
        route_names.push("exact");
    }
    if sc.routes.fock {
        route_names.push("fock");
    }
    push("routes", route_names.join(","));
    if let Some(summary) = &coefficients {
        push(
            "unitarity_defect_k0",
            format!("{:.16e}", summary.unitarity_defect[0]),
        );
        push(
            "unitarity_defect_k1",
            format!("{:.16e}", summary.unitarity_defect[1]),
        );
    }
    if let Some(report) = &fock {
        push(
            "fock_occupancy_gap",
            format!("{:.16e}", report.occupancy_gap),
        );
        if let Some(g) = report.overlap_gap {
            push("fock_overlap_gap", format!("{g:.16e}"));
        }
        push("fock_norm_drift", format!("{:.16e}", report.norm_drift));
    }
    for (k, v) in &notes {
        push(k, v.clone());
    }
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    push("timestamp_unix_s", format!("{timestamp}"));

    let result = RunResult {
        times,
        photon_number: photon,
        forcing_offset: forcing,
        decoherence_exact: decoherence_exact_col,
        decoherence_closed: decoherence_closed_col,
        manifest,
    };
    result.check_invariants()?;

    Ok(SimulationOutput {
        scenario: sc.clone(),
        warnings,
        gamma_target,
        gamma_effective,
        bath,
        branches: [h0, h1],
        lamb_shifts: [lamb0, lamb1],
        result,
        coefficients,
        fock,
        written: Vec::new(),
    })
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write a file atomically: temp file in the same directory, then rename.
fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, content).map_err(io_error(&tmp))?;
    fs::rename(&tmp, path).map_err(io_error(path))?;
    Ok(())
}

/// Sibling output path: same directory, `<stem><suffix>.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let name = format!("{stem}{suffix}.csv");
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.join(name),
        _ => PathBuf::from(name),
    }
}

fn bath_csv(out: &SimulationOutput) -> String {
    let bath = &out.bath;
    let h0 = &out.branches[0];
    let mut s = String::new();
    s.push_str(&format!(
        "# calibration_scalar = {:.16e}\n",
        bath.calibration_scalar
    ));
    s.push_str(&format!("# gamma_target_rad_s = {:.16e}\n", out.gamma_target));
    s.push_str("j,frequency_rad_s,detuning_rad_s,lorentzian_weight,phase_coupling,coupling_k0_j\n");
    for j in 0..bath.len() {
        s.push_str(&format!(
            "{j},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            bath.frequencies[j],
            bath.detunings[j],
            bath.weights[j],
            bath.phase_couplings[j],
            h0.couplings[j],
        ));
    }
    s
}

fn coefficients_csv(out: &SimulationOutput, summary: &CoefficientSummary) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "# unitarity_defect_k0 = {:.16e}\n# unitarity_defect_k1 = {:.16e}\n",
        summary.unitarity_defect[0], summary.unitarity_defect[1]
    ));
    s.push_str("t,re_u_k0,im_u_k0,bath_norm_sq_k0,re_u_k1,im_u_k1,bath_norm_sq_k1\n");
    for (i, &t) in out.result.times.iter().enumerate() {
        s.push_str(&format!(
            "{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            summary.u[0][i].re,
            summary.u[0][i].im,
            summary.bath_norm_squared[0][i],
            summary.u[1][i].re,
            summary.u[1][i].im,
            summary.bath_norm_squared[1][i],
        ));
    }
    s
}

/// Execute a scenario and write its artifacts: the results CSV at the
/// scenario's output path, a bath CSV (`<stem>_bath.csv`), and — when the
/// exact route ran — a propagator summary (`<stem>_coefficients.csv`).
pub fn run(sc: &Scenario) -> Result<SimulationOutput> {
    // Refuse a missing output directory up front rather than after the
    // simulation has already burned its runtime.
    if let Some(parent) = sc.output_path.parent() {
        if !parent.as_os_str().is_empty() && !parent.is_dir() {
            return Err(Error::Io {
                path: sc.output_path.display().to_string(),
                source: std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("output directory {} does not exist", parent.display()),
                ),
            });
        }
    }
    let mut out = simulate(sc)?;
    write_atomic(&sc.output_path, &out.result.to_csv_string())?;
    out.written.push(sc.output_path.clone());
    let bath_path = sibling(&sc.output_path, "_bath");
    write_atomic(&bath_path, &bath_csv(&out))?;
    out.written.push(bath_path);
    if let Some(summary) = &out.coefficients {
        let path = sibling(&sc.output_path, "_coefficients");
        write_atomic(&path, &coefficients_csv(&out, summary))?;
        out.written.push(path);
    }
    Ok(out)
}

/// One row of a sweep summary.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub value: f64,
    /// Short-time decoherence rate Γ fitted from −ln D ≈ Γt (NaN when no
    /// decoherence route produced a fit).
    pub fitted_rate: f64,
    /// Mean decoherence factor over the final tenth of the grid (NaN when
    /// no decoherence route ran).
    pub plateau: f64,
}

/// Outputs of a parameter sweep.
#[derive(Debug)]
pub struct SweepOutput {
    pub runs: Vec<SimulationOutput>,
    pub rows: Vec<SweepRow>,
    pub summary_path: PathBuf,
}

fn fit_and_plateau(result: &RunResult) -> (f64, f64) {
    let column = result
        .decoherence_closed
        .as_ref()
        .or(result.decoherence_exact.as_ref());
    match column {
        Some(d) => {
            let rate = short_time_rate(d, &result.times).unwrap_or(f64::NAN);
            let tail = (d.len() / 10).max(1);
            let plateau = d[d.len() - tail..].iter().sum::<f64>() / tail as f64;
            (rate, plateau)
        }
        None => (f64::NAN, f64::NAN),
    }
}

/// Run the scenario once per sweep value, with output files suffixed by the
/// value, then write a `<stem>_sweep.csv` summary of (value, fitted rate,
/// plateau). Runs execute sequentially; each writes its own isolated files.
pub fn sweep(sc: &Scenario, key: &str, values: &[f64]) -> Result<SweepOutput> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one value".into(),
        ));
    }
    // Surface key errors before any expensive work.
    sc.clone().set_numeric(key, values[0])?;

    let mut runs = Vec::with_capacity(values.len());
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut variant = sc.clone();
        variant.set_numeric(key, value)?;
        variant.output_path = sibling(&sc.output_path, &format!("_{value}"));
        let out = run(&variant)?;
        let (fitted_rate, plateau) = fit_and_plateau(&out.result);
        rows.push(SweepRow {
            value,
            fitted_rate,
            plateau,
        });
        runs.push(out);
    }

    let summary_path = sibling(&sc.output_path, "_sweep");
    let mut content = String::from("value,fitted_rate_rad_s,plateau\n");
    for row in &rows {
        content.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            row.value, row.fitted_rate, row.plateau
        ));
    }
    write_atomic(&summary_path, &content)?;
    Ok(SweepOutput {
        runs,
        rows,
        summary_path,
    })
}

/// One validation check: a named measured value against its bound.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Results of the `validate` pipeline.
#[derive(Debug)]
pub struct ValidationReport {
    pub warnings: Vec<String>,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Run the self-consistency gates on a scenario, on a reduced time grid
/// (at most 201 samples): exact-route unitarity, golden-rule calibration,
/// displacement cancellation, and — when the scenario runs both
/// decoherence routes on a coherent state — closed-form agreement.
pub fn validate_scenario(sc: &Scenario) -> Result<ValidationReport> {
    let mut reduced = sc.clone();
    reduced.time_grid.sample_count = sc.time_grid.sample_count.min(201);
    reduced.routes.exact = true;
    reduced.routes.fock = false;
    let out = simulate(&reduced)?;
    let mut checks = Vec::new();

    let summary = out
        .coefficients
        .as_ref()
        .expect("the exact route was forced on");
    let defect = summary.unitarity_defect[0].max(summary.unitarity_defect[1]);
    checks.push(CheckOutcome {
        name: "exact_unitarity_defect",
        value: defect,
        bound: UNITARITY_DEFECT_BOUND,
        pass: defect <= UNITARITY_DEFECT_BOUND,
    });

    let mut residual: f64 = 0.0;
    for h in &out.branches {
        let d = solve_displacements(h)?;
        residual = residual.max(displacement_residual(h, &d));
    }
    checks.push(CheckOutcome {
        name: "displacement_residual",
        value: residual,
        bound: DISPLACEMENT_RESIDUAL_BOUND,
        pass: residual <= DISPLACEMENT_RESIDUAL_BOUND,
    });

    let center_coupling = out.branches[0].couplings[out.bath.center_index()];
    if center_coupling != 0.0 {
        let phi_eff = screening_phase(
            sc.physical.classical_flux_phase,
            sc.physical.screening_parameter,
        )?;
        let expected = out.gamma_target * phi_eff.cos().powi(2);
        let rel = (out.gamma_effective - expected).abs() / out.gamma_target;
        checks.push(CheckOutcome {
            name: "golden_rule_calibration",
            value: rel,
            bound: CALIBRATION_REL_BOUND,
            pass: rel <= CALIBRATION_REL_BOUND,
        });
    }

    if let (Some(de), Some(dc)) = (
        &out.result.decoherence_exact,
        &out.result.decoherence_closed,
    ) {
        let gap = de
            .iter()
            .zip(dc.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        checks.push(CheckOutcome {
            name: "route_agreement",
            value: gap,
            bound: ROUTE_AGREEMENT_BOUND,
            pass: gap <= ROUTE_AGREEMENT_BOUND,
        });
    }

    Ok(ValidationReport {
        warnings: out.warnings,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::branch_frequency_pull_magnitude;
    use crate::scenario::{BathSettings, Routes, TimeGrid};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Small fast scenario: default device, decay target a quarter of the
    /// branch pull (split ≈ 9.5 effective linewidths, lines well inside the
    /// ±40 γ_eff band), N = 401.
    fn tiny_scenario(dir: &std::path::Path) -> Scenario {
        let mut sc = Scenario::builtin_default();
        let pull = branch_frequency_pull_magnitude(&sc.physical).unwrap();
        sc.gamma_override = Some(pull / 2.38);
        sc.bath = BathSettings::default();
        sc.time_grid = TimeGrid {
            t_max_over_gamma: 2.0,
            sample_count: 41,
        };
        sc.output_path = dir.join("results.csv");
        sc
    }

    #[test]
    fn simulate_produces_a_consistent_result() {
        let dir = tempfile::tempdir().unwrap();
        let sc = tiny_scenario(dir.path());
        let out = simulate(&sc).unwrap();
        out.result.check_invariants().unwrap();
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        assert!(out.written.is_empty());

        // Initial samples: photon number starts at |α|² exactly, both
        // decoherence routes at 1 (exact route up to eigensolver rounding).
        for k in 0..2 {
            assert_abs_diff_eq!(out.result.photon_number[k][0], 4.0, epsilon = 1e-12);
        }
        let de = out.result.decoherence_exact.as_ref().unwrap();
        let dc = out.result.decoherence_closed.as_ref().unwrap();
        assert!((de[0] - 1.0).abs() <= 1e-10);
        assert_eq!(dc[0], 1.0);

        // The decay actually happened: the golden-rule rate is cos²(π/4) of
        // the target, and the exact-route defect is at rounding level.
        assert_relative_eq!(
            out.gamma_effective,
            0.5 * out.gamma_target,
            max_relative = 1e-12
        );
        let summary = out.coefficients.as_ref().unwrap();
        assert!(summary.unitarity_defect[0] <= 1e-10);
        assert!(summary.unitarity_defect[1] <= 1e-10);

        // Manifest completeness: the defaulted, source-unstated knobs.
        let keys: Vec<&str> = out.result.manifest.iter().map(|(k, _)| k.as_str()).collect();
        for required in [
            "classical_flux_phase_rad",
            "gamma_target_source",
            "gamma_effective_rad_s",
            "squid_area_m2",
            "calibration_scalar",
            "lamb_shift_k0_rad_s",
            "lamb_shift_k1_rad_s",
            "config_hash",
            "timestamp_unix_s",
        ] {
            assert!(keys.contains(&required), "manifest misses {required}");
        }
    }

    #[test]
    fn run_writes_results_bath_and_coefficients() {
        let dir = tempfile::tempdir().unwrap();
        let sc = tiny_scenario(dir.path());
        let out = run(&sc).unwrap();
        assert_eq!(out.written.len(), 3);
        let results = std::fs::read_to_string(&sc.output_path).unwrap();
        let header = results
            .lines()
            .find(|l| !l.starts_with('#'))
            .unwrap();
        assert_eq!(header, "t,n_k0,n_k1,F,D_exact,D_closed");
        let data_rows = results
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty())
            .count();
        assert_eq!(data_rows, 1 + 41);

        let bath = std::fs::read_to_string(dir.path().join("results_bath.csv")).unwrap();
        assert_eq!(bath.lines().filter(|l| !l.starts_with('#')).count(), 1 + 401);
        let coeff = std::fs::read_to_string(dir.path().join("results_coefficients.csv")).unwrap();
        assert!(coeff.starts_with("# unitarity_defect_k0"));
        // No temp files left behind.
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "tmp"))
            .collect();
        assert!(leftovers.is_empty(), "{leftovers:?}");
    }

    #[test]
    fn run_refuses_a_missing_output_directory_before_simulating() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = tiny_scenario(dir.path());
        sc.output_path = dir.path().join("missing").join("results.csv");
        let err = run(&sc).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
        // The up-front check reports the directory, not a failed temp write.
        assert!(err.to_string().contains("output directory"), "{err}");
    }

    #[test]
    fn identical_scenarios_serialize_identically_up_to_the_timestamp() {
        let dir = tempfile::tempdir().unwrap();
        let sc = tiny_scenario(dir.path());
        let strip = |s: String| -> String {
            s.lines()
                .filter(|l| !l.starts_with("# timestamp_unix_s"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let a = strip(simulate(&sc).unwrap().result.to_csv_string());
        let b = strip(simulate(&sc).unwrap().result.to_csv_string());
        assert_eq!(a, b);
    }

    #[test]
    fn closed_only_runs_use_the_decay_envelope() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = tiny_scenario(dir.path());
        sc.routes = Routes {
            closed_form: true,
            exact: false,
            fock: false,
        };
        let out = simulate(&sc).unwrap();
        assert!(out.result.decoherence_exact.is_none());
        assert!(out.coefficients.is_none());
        for (i, &t) in out.result.times.iter().enumerate() {
            let expected = 4.0 * (-out.gamma_effective * t).exp();
            assert_relative_eq!(out.result.photon_number[0][i], expected, max_relative = 1e-12);
            assert_eq!(out.result.forcing_offset[i], 0.0);
        }
        let model = out
            .result
            .manifest
            .iter()
            .find(|(k, _)| k == "photon_model")
            .unwrap();
        assert_eq!(model.1, "decay_envelope");
    }

    #[test]
    fn horizon_guard_stops_over_long_grids() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = tiny_scenario(dir.path());
        sc.time_grid.t_max_over_gamma = 1e6;
        match simulate(&sc) {
            Err(Error::HorizonGuard { .. }) => {}
            other => panic!("expected the horizon guard, got {other:?}"),
        }
    }

    #[test]
    fn fock_route_rejects_full_size_baths() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = tiny_scenario(dir.path());
        sc.routes.fock = true;
        match simulate(&sc) {
            Err(Error::InvalidConfig(message)) => {
                assert!(message.contains("bath modes"), "{message}");
            }
            other => panic!("expected a size rejection, got {other:?}"),
        }
    }

    #[test]
    fn sweep_over_alpha_recovers_the_quadratic_rate_law() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = Scenario::builtin_rate_law();
        sc.output_path = dir.path().join("rate.csv");
        let out = sweep(&sc, "initial.alpha", &[1.0, 2.0]).unwrap();
        assert_eq!(out.rows.len(), 2);
        // Γ = γ_eff·|α|², with γ_eff = 1 by construction of the preset.
        assert_relative_eq!(out.rows[0].fitted_rate, 1.0, max_relative = 2e-2);
        assert_relative_eq!(
            out.rows[1].fitted_rate / out.rows[0].fitted_rate,
            4.0,
            max_relative = 2e-2
        );
        assert!(dir.path().join("rate_1.csv").exists());
        assert!(dir.path().join("rate_2.csv").exists());
        let summary = std::fs::read_to_string(&out.summary_path).unwrap();
        assert_eq!(summary.lines().count(), 1 + 2);
        assert!(summary.starts_with("value,fitted_rate_rad_s,plateau\n"));
    }

    #[test]
    fn sweep_rejects_unknown_keys_and_empty_value_lists() {
        let dir = tempfile::tempdir().unwrap();
        let sc = tiny_scenario(dir.path());
        match sweep(&sc, "bath.spacing", &[1.0]) {
            Err(Error::UnknownSweepKey { valid, .. }) => {
                assert!(valid.contains("bath.mode_count"));
            }
            other => panic!("expected an unknown-key error, got {other:?}"),
        }
        assert!(matches!(
            sweep(&sc, "initial.alpha", &[]),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn validation_report_passes_in_the_route_agreement_regime() {
        // Split/γ_eff = 76 over a ±320 γ_eff band: the regime where the
        // closed form tracks the exact overlap within 2%.
        let dir = tempfile::tempdir().unwrap();
        let mut sc = Scenario::builtin_default();
        let pull = branch_frequency_pull_magnitude(&sc.physical).unwrap();
        sc.gamma_override = Some(pull / 19.0);
        sc.bath = BathSettings {
            mode_count: 3201,
            half_bandwidth_rad_s: None,
            half_bandwidth_over_gamma: Some(160.0),
            lorentz_amplitude: 1.0,
        };
        sc.time_grid = TimeGrid {
            t_max_over_gamma: 15.0,
            sample_count: 201,
        };
        sc.output_path = dir.path().join("validate.csv");
        let report = validate_scenario(&sc).unwrap();
        let names: Vec<&str> = report.checks.iter().map(|c| c.name).collect();
        for expected in [
            "exact_unitarity_defect",
            "displacement_residual",
            "golden_rule_calibration",
            "route_agreement",
        ] {
            assert!(names.contains(&expected), "missing check {expected}");
        }
        for check in &report.checks {
            assert!(
                check.pass,
                "check {} failed: {:.3e} > {:.3e}",
                check.name, check.value, check.bound
            );
        }
    }
}
