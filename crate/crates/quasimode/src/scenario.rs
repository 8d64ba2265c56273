//! User-facing simulation descriptions: the flat `key = value` config
//! format, built-in presets, and the sweep-key table.
//!
//! Dimensioned config keys carry a unit suffix (`_ghz`, `_uev`, `_rad`,
//! `_rad_s`, `_m`, `_m2`, `_m3`); values are converted to SI at this
//! boundary and stay SI everywhere else.

use std::path::PathBuf;

use num_complex::Complex64;

use crate::bath::BathSpec;
use crate::constants::MICRO_EV;
use crate::hamiltonian::{branch_frequency_pull_magnitude, config_warnings};
use crate::observables::{BathKind, InitialState, ResonantKind};
use crate::physparams::PhysicalConfig;
use crate::{Error, Result};

/// γ_target = (frequency-pull magnitude)/this ratio in the oscillating
/// presets. At the preset flux phase π/4 the effective (screened) decay is
/// half the target, so the branch frequency split is ≈ 95 effective
/// linewidths: strongly underdamped oscillating decoherence with a clean
/// plateau, inside both bath guards.
pub const DEFAULT_GAMMA_PULL_RATIO: f64 = 23.8;

/// Simulation time grid; `t_max` is expressed in units of the effective
/// decay time 1/γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    /// t_max·γ (dimensionless).
    pub t_max_over_gamma: f64,
    /// Number of uniform samples including both endpoints; at least 2.
    pub sample_count: usize,
}

/// Which computation routes a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Routes {
    /// Closed-form oscillating-decay decoherence factor.
    pub closed_form: bool,
    /// Exact mode-matrix propagation (coefficients, photon number, overlap).
    pub exact: bool,
    /// Brute-force truncated Fock cross-check (tiny baths only).
    pub fock: bool,
}

impl Routes {
    /// True when at least one route is selected.
    pub fn any(&self) -> bool {
        self.closed_form || self.exact || self.fock
    }
}

/// Bath discretization knobs as configured; the target decay rate is
/// resolved later (override or ω/Q), so the bandwidth may be given either
/// absolutely or in units of γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSettings {
    /// Number of background modes N.
    pub mode_count: usize,
    /// Absolute half bandwidth W/2 [rad/s]; exclusive with the relative form.
    pub half_bandwidth_rad_s: Option<f64>,
    /// Half bandwidth in units of the target decay rate.
    pub half_bandwidth_over_gamma: Option<f64>,
    /// Dimensionless Lorentzian amplitude Λ.
    pub lorentz_amplitude: f64,
}

impl Default for BathSettings {
    fn default() -> Self {
        BathSettings {
            mode_count: 401,
            half_bandwidth_rad_s: None,
            half_bandwidth_over_gamma: Some(20.0),
            lorentz_amplitude: 1.0,
        }
    }
}

impl BathSettings {
    /// Resolve into a calibration-ready spec for a known target decay rate.
    pub fn resolve(&self, target_decay: f64) -> Result<BathSpec> {
        let half_bandwidth = match (self.half_bandwidth_rad_s, self.half_bandwidth_over_gamma) {
            (Some(w), None) => w,
            (None, Some(r)) => r * target_decay,
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "bath bandwidth is unset; give half_bandwidth_rad_s or \
                     half_bandwidth_over_gamma"
                        .into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "half_bandwidth_rad_s and half_bandwidth_over_gamma are \
                     mutually exclusive"
                        .into(),
                ))
            }
        };
        let spec = BathSpec {
            mode_count: self.mode_count,
            half_bandwidth,
            target_decay,
            lorentz_amplitude: self.lorentz_amplitude,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A complete, self-contained description of one simulation run.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Device parameters (SI units).
    pub physical: PhysicalConfig,
    /// Optional decay-rate override [rad/s]; otherwise γ = ω/Q.
    pub gamma_override: Option<f64>,
    /// Bath discretization settings.
    pub bath: BathSettings,
    /// Initial field + qubit preparation.
    pub initial: InitialState,
    /// Sampling grid.
    pub time_grid: TimeGrid,
    /// Routes to execute.
    pub routes: Routes,
    /// Per-mode occupation cutoff for the brute-force cross-check route.
    pub fock_cutoff: usize,
    /// Optional branch-frequency-split override [rad/s] applied to the
    /// closed-form route only (the physical split cannot be nulled without
    /// also nulling the couplings, so rate-law studies use this knob).
    pub closed_form_detuning_override: Option<f64>,
    /// Destination of the results CSV.
    pub output_path: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::builtin_default()
    }
}

impl Scenario {
    /// Flagship preset: the reference device biased at φ_c = π/4 so both
    /// the qubit-state-dependent coupling and the forcing are active, with
    /// the decay target set a factor [`DEFAULT_GAMMA_PULL_RATIO`] below the
    /// branch frequency pull (oscillating-decoherence regime) and a dense
    /// wide bath (N = 4801 over ±240γ) so both decoherence routes apply.
    pub fn builtin_default() -> Self {
        let physical = PhysicalConfig::default();
        let pull = branch_frequency_pull_magnitude(&physical)
            .expect("the reference device is valid by construction");
        Scenario {
            gamma_override: Some(pull / DEFAULT_GAMMA_PULL_RATIO),
            bath: BathSettings {
                mode_count: 4801,
                half_bandwidth_rad_s: None,
                half_bandwidth_over_gamma: Some(240.0),
                lorentz_amplitude: 1.0,
            },
            initial: InitialState::coherent_vacuum(Complex64::new(2.0, 0.0)),
            time_grid: TimeGrid {
                t_max_over_gamma: 15.0,
                sample_count: 4001,
            },
            routes: Routes {
                closed_form: true,
                exact: true,
                fock: false,
            },
            fock_cutoff: 8,
            closed_form_detuning_override: None,
            output_path: PathBuf::from("results.csv"),
            physical,
        }
    }

    /// Oscillating-decay reproduction preset: the default scenario with the
    /// closed-form route only, written to `fig2.csv`.
    pub fn builtin_fig2() -> Self {
        let mut s = Scenario::builtin_default();
        s.routes = Routes {
            closed_form: true,
            exact: false,
            fock: false,
        };
        s.output_path = PathBuf::from("fig2.csv");
        s
    }

    /// Photon-loss benchmark: zero flux phase (full coupling, no forcing),
    /// unit decay rate, the N = 401 / ±20γ bath, a five-photon Fock state,
    /// and the exact route over three decay times.
    pub fn builtin_dissipation_benchmark() -> Self {
        let mut s = Scenario::builtin_default();
        s.physical.classical_flux_phase = 0.0;
        s.gamma_override = Some(1.0);
        s.bath = BathSettings::default();
        s.initial = InitialState::fock_vacuum(5);
        s.time_grid = TimeGrid {
            t_max_over_gamma: 3.0,
            sample_count: 301,
        };
        s.routes = Routes {
            closed_form: false,
            exact: true,
            fock: false,
        };
        s.output_path = PathBuf::from("dissipation.csv");
        s
    }

    /// Short-time rate-law preset: zero flux phase, unit decay rate, the
    /// branch split overridden to zero in the closed form (degenerate
    /// branches), sampled deep inside the linear-decay window so a sweep
    /// over α recovers Γ = γ|α|².
    pub fn builtin_rate_law() -> Self {
        let mut s = Scenario::builtin_default();
        s.physical.classical_flux_phase = 0.0;
        s.gamma_override = Some(1.0);
        s.bath = BathSettings::default();
        s.initial = InitialState::coherent_vacuum(Complex64::new(1.0, 0.0));
        s.time_grid = TimeGrid {
            t_max_over_gamma: 0.002,
            sample_count: 401,
        };
        s.routes = Routes {
            closed_form: true,
            exact: false,
            fock: false,
        };
        s.closed_form_detuning_override = Some(0.0);
        s.output_path = PathBuf::from("rate_law.csv");
        s
    }

    /// Look up a preset by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Scenario::builtin_default()),
            "fig2" => Ok(Scenario::builtin_fig2()),
            "dissipation_benchmark" => Ok(Scenario::builtin_dissipation_benchmark()),
            "rate_law" => Ok(Scenario::builtin_rate_law()),
            other => Err(Error::InvalidConfig(format!(
                "unknown builtin scenario '{other}'; available: default, \
                 fig2, dissipation_benchmark, rate_law"
            ))),
        }
    }

    /// Check scenario-level invariants; returns non-fatal physics warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = self.physical.validate()?;
        warnings.extend(config_warnings(
            &self.physical,
            self.initial.mean_resonant_occupancy(),
        )?);
        self.initial.validate()?;
        if let Some(g) = self.gamma_override {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "gamma_override_rad_s must be positive and finite, got {g}"
                )));
            }
        }
        if let Some(d) = self.closed_form_detuning_override {
            if !d.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "closed_form_detuning_rad_s must be finite, got {d}"
                )));
            }
        }
        if self.bath.mode_count < 2 {
            return Err(Error::InvalidConfig(format!(
                "bath mode_count must be at least 2, got {}",
                self.bath.mode_count
            )));
        }
        for (name, value) in [
            ("half_bandwidth_rad_s", self.bath.half_bandwidth_rad_s),
            ("half_bandwidth_over_gamma", self.bath.half_bandwidth_over_gamma),
        ] {
            if let Some(v) = value {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if self.time_grid.sample_count < 2 {
            return Err(Error::InvalidConfig(format!(
                "time grid needs at least 2 samples, got {}",
                self.time_grid.sample_count
            )));
        }
        let t = self.time_grid.t_max_over_gamma;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "t_max_over_gamma must be positive and finite, got {t}"
            )));
        }
        if !self.routes.any() {
            return Err(Error::InvalidConfig(
                "no computation route selected; enable closed_form, exact, \
                 or fock"
                    .into(),
            ));
        }
        if self.routes.fock && !self.routes.exact {
            return Err(Error::InvalidConfig(
                "the fock route is a cross-check of the exact route; enable \
                 exact as well"
                    .into(),
            ));
        }
        if self.routes.fock && self.fock_cutoff == 0 {
            return Err(Error::InvalidConfig(
                "fock_cutoff must be at least 1".into(),
            ));
        }
        Ok(warnings)
    }

    /// Canonical config-file rendering; [`from_config_string`] parses it
    /// back to an identical scenario.
    pub fn to_config_string(&self) -> String {
        let p = &self.physical;
        let mut out = String::new();
        let ghz = p.resonant_angular_frequency / (2.0 * std::f64::consts::PI * 1e9);
        out.push_str("[physical]\n");
        out.push_str(&format!("resonant_frequency_ghz = {ghz:.16e}\n"));
        out.push_str(&format!("quality_factor = {:.16e}\n", p.quality_factor));
        out.push_str(&format!(
            "charging_energy_uev = {:.16e}\n",
            p.charging_energy / MICRO_EV
        ));
        out.push_str(&format!(
            "josephson_energy_uev = {:.16e}\n",
            p.josephson_energy / MICRO_EV
        ));
        out.push_str(&format!("curvature_radius_m = {:.16e}\n", p.curvature_radius));
        out.push_str(&format!("cavity_length_m = {:.16e}\n", p.cavity_length));
        out.push_str(&format!("squid_area_m2 = {:.16e}\n", p.squid_area));
        out.push_str(&format!("mode_volume_m3 = {:.16e}\n", p.mode_volume));
        out.push_str(&format!("gate_charge = {:.16e}\n", p.gate_charge));
        out.push_str(&format!(
            "classical_flux_phase_rad = {:.16e}\n",
            p.classical_flux_phase
        ));
        out.push_str(&format!(
            "screening_parameter = {:.16e}\n",
            p.screening_parameter
        ));
        out.push_str(&format!("squid_position_m = {:.16e}\n", p.squid_position));
        if let Some(g) = self.gamma_override {
            out.push_str(&format!("gamma_override_rad_s = {g:.16e}\n"));
        }
        out.push_str("\n[bath]\n");
        out.push_str(&format!("mode_count = {}\n", self.bath.mode_count));
        if let Some(w) = self.bath.half_bandwidth_rad_s {
            out.push_str(&format!("half_bandwidth_rad_s = {w:.16e}\n"));
        }
        if let Some(r) = self.bath.half_bandwidth_over_gamma {
            out.push_str(&format!("half_bandwidth_over_gamma = {r:.16e}\n"));
        }
        out.push_str(&format!(
            "lorentz_amplitude = {:.16e}\n",
            self.bath.lorentz_amplitude
        ));
        out.push_str("\n[initial]\n");
        match &self.initial.resonant_kind {
            ResonantKind::Coherent(a) => {
                out.push_str("kind = coherent\n");
                out.push_str(&format!("alpha = {:.16e}\n", a.re));
            }
            ResonantKind::Fock(n) => {
                out.push_str("kind = fock\n");
                out.push_str(&format!("fock_n = {n}\n"));
            }
        }
        out.push_str("\n[time_grid]\n");
        out.push_str(&format!(
            "t_max_over_gamma = {:.16e}\n",
            self.time_grid.t_max_over_gamma
        ));
        out.push_str(&format!("sample_count = {}\n", self.time_grid.sample_count));
        out.push_str("\n[routes]\n");
        out.push_str(&format!("closed_form = {}\n", self.routes.closed_form));
        out.push_str(&format!("exact = {}\n", self.routes.exact));
        out.push_str(&format!("fock = {}\n", self.routes.fock));
        out.push_str(&format!("fock_cutoff = {}\n", self.fock_cutoff));
        if let Some(d) = self.closed_form_detuning_override {
            out.push_str(&format!("closed_form_detuning_rad_s = {d:.16e}\n"));
        }
        out.push_str("\n[output]\n");
        out.push_str(&format!("path = {}\n", self.output_path.display()));
        out
    }

    /// Valid sweep keys, in the `section.key` form the CLI accepts.
    pub fn sweep_keys() -> &'static [&'static str] {
        &[
            "physical.classical_flux_phase_rad",
            "physical.gamma_override_rad_s",
            "bath.mode_count",
            "bath.half_bandwidth_rad_s",
            "bath.half_bandwidth_over_gamma",
            "bath.lorentz_amplitude",
            "initial.alpha",
            "initial.fock_n",
            "time_grid.t_max_over_gamma",
            "time_grid.sample_count",
        ]
    }

    /// Apply one numeric sweep value. Integer-valued keys require an
    /// integral value; `initial.alpha`/`initial.fock_n` switch the
    /// preparation kind to coherent/Fock respectively.
    pub fn set_numeric(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sweep value for {key} must be finite, got {value}"
            )));
        }
        let as_integer = |value: f64, key: &str| -> Result<usize> {
            let rounded = value.round();
            if (value - rounded).abs() > 1e-9 || rounded < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{key} needs a nonnegative integer, got {value}"
                )));
            }
            Ok(rounded as usize)
        };
        match key {
            "physical.classical_flux_phase_rad" => self.physical.classical_flux_phase = value,
            "physical.gamma_override_rad_s" => self.gamma_override = Some(value),
            "bath.mode_count" => self.bath.mode_count = as_integer(value, key)?,
            "bath.half_bandwidth_rad_s" => {
                self.bath.half_bandwidth_rad_s = Some(value);
                self.bath.half_bandwidth_over_gamma = None;
            }
            "bath.half_bandwidth_over_gamma" => {
                self.bath.half_bandwidth_over_gamma = Some(value);
                self.bath.half_bandwidth_rad_s = None;
            }
            "bath.lorentz_amplitude" => self.bath.lorentz_amplitude = value,
            "initial.alpha" => {
                self.initial.resonant_kind = ResonantKind::Coherent(Complex64::new(value, 0.0));
                self.initial.bath_kind = BathKind::Vacuum;
            }
            "initial.fock_n" => {
                self.initial.resonant_kind = ResonantKind::Fock(as_integer(value, key)? as u32);
                self.initial.bath_kind = BathKind::Vacuum;
            }
            "time_grid.t_max_over_gamma" => self.time_grid.t_max_over_gamma = value,
            "time_grid.sample_count" => {
                self.time_grid.sample_count = as_integer(value, key)?
            }
            _ => {
                return Err(Error::UnknownSweepKey {
                    key: key.to_string(),
                    valid: Scenario::sweep_keys().join(", "),
                })
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Physical,
    Bath,
    Initial,
    TimeGrid,
    Routes,
    Output,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::ConfigParse {
        line,
        message: message.into(),
    }
}

fn parse_f64(value: &str, key: &str, line: usize) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| parse_error(line, format!("{key} expects a number, got '{value}'")))
}

fn parse_usize(value: &str, key: &str, line: usize) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| parse_error(line, format!("{key} expects a nonnegative integer, got '{value}'")))
}

fn parse_bool(value: &str, key: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(parse_error(
            line,
            format!("{key} expects true or false, got '{value}'"),
        )),
    }
}

/// Parse a flat `key = value` config with `[section]` headers into a
/// scenario. Unset keys keep their [`Scenario::builtin_default`] values;
/// an empty (or comment-only) file is rejected. `#` starts a comment line.
pub fn from_config_string(text: &str) -> Result<Scenario> {
    let mut sc = Scenario::builtin_default();
    let mut section = Section::None;
    let mut keys_seen = 0usize;

    // Deferred [initial] keys: the preparation is rebuilt once the section
    // is complete so kind/alpha/fock_n may come in any order.
    let mut initial_kind: Option<(String, usize)> = None;
    let mut initial_alpha: Option<(f64, usize)> = None;
    let mut initial_fock_n: Option<(u32, usize)> = None;

    // Geometry-tracking defaults: unless set explicitly, the mode volume
    // follows the configured frequency and the probe sits mid-cavity.
    let mut saw_mode_volume = false;
    let mut saw_squid_position = false;

    // The two bandwidth forms override each other against the builtin
    // default, but giving both in one file is a contradiction.
    let mut saw_hb_absolute = false;
    let mut saw_hb_relative = false;

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_error(line, format!("unterminated section header '{trimmed}'")))?
                .trim();
            section = match name {
                "physical" => Section::Physical,
                "bath" => Section::Bath,
                "initial" => Section::Initial,
                "time_grid" => Section::TimeGrid,
                "routes" => Section::Routes,
                "output" => Section::Output,
                other => {
                    return Err(parse_error(
                        line,
                        format!(
                            "unknown section '{other}'; expected physical, bath, \
                             initial, time_grid, routes, or output"
                        ),
                    ))
                }
            };
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| parse_error(line, format!("expected 'key = value', got '{trimmed}'")))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(parse_error(
                line,
                format!("expected 'key = value', got '{trimmed}'"),
            ));
        }
        keys_seen += 1;

        match section {
            Section::None => {
                return Err(parse_error(
                    line,
                    format!("key '{key}' appears before any [section] header"),
                ))
            }
            Section::Physical => match key {
                "resonant_frequency_ghz" => {
                    sc.physical.resonant_angular_frequency =
                        2.0 * std::f64::consts::PI * 1e9 * parse_f64(value, key, line)?;
                }
                "quality_factor" => sc.physical.quality_factor = parse_f64(value, key, line)?,
                "charging_energy_uev" => {
                    sc.physical.charging_energy = MICRO_EV * parse_f64(value, key, line)?;
                }
                "josephson_energy_uev" => {
                    sc.physical.josephson_energy = MICRO_EV * parse_f64(value, key, line)?;
                }
                "curvature_radius_m" => {
                    sc.physical.curvature_radius = parse_f64(value, key, line)?;
                }
                "cavity_length_m" => sc.physical.cavity_length = parse_f64(value, key, line)?,
                "squid_area_m2" => sc.physical.squid_area = parse_f64(value, key, line)?,
                "mode_volume_m3" => {
                    sc.physical.mode_volume = parse_f64(value, key, line)?;
                    saw_mode_volume = true;
                }
                "gate_charge" => sc.physical.gate_charge = parse_f64(value, key, line)?,
                "classical_flux_phase_rad" => {
                    sc.physical.classical_flux_phase = parse_f64(value, key, line)?;
                }
                "screening_parameter" => {
                    sc.physical.screening_parameter = parse_f64(value, key, line)?;
                }
                "squid_position_m" => {
                    sc.physical.squid_position = parse_f64(value, key, line)?;
                    saw_squid_position = true;
                }
                "gamma_override_rad_s" => {
                    sc.gamma_override = Some(parse_f64(value, key, line)?);
                }
                other => {
                    return Err(parse_error(
                        line,
                        format!("unknown key '{other}' in [physical]"),
                    ))
                }
            },
            Section::Bath => match key {
                "mode_count" => sc.bath.mode_count = parse_usize(value, key, line)?,
                "half_bandwidth_rad_s" => {
                    if saw_hb_relative {
                        return Err(parse_error(
                            line,
                            "half_bandwidth_rad_s and half_bandwidth_over_gamma \
                             are mutually exclusive; set only one",
                        ));
                    }
                    saw_hb_absolute = true;
                    sc.bath.half_bandwidth_rad_s = Some(parse_f64(value, key, line)?);
                    sc.bath.half_bandwidth_over_gamma = None;
                }
                "half_bandwidth_over_gamma" => {
                    if saw_hb_absolute {
                        return Err(parse_error(
                            line,
                            "half_bandwidth_rad_s and half_bandwidth_over_gamma \
                             are mutually exclusive; set only one",
                        ));
                    }
                    saw_hb_relative = true;
                    sc.bath.half_bandwidth_over_gamma = Some(parse_f64(value, key, line)?);
                    sc.bath.half_bandwidth_rad_s = None;
                }
                "lorentz_amplitude" => {
                    sc.bath.lorentz_amplitude = parse_f64(value, key, line)?;
                }
                other => {
                    return Err(parse_error(line, format!("unknown key '{other}' in [bath]")))
                }
            },
            Section::Initial => match key {
                "kind" => initial_kind = Some((value.to_string(), line)),
                "alpha" => initial_alpha = Some((parse_f64(value, key, line)?, line)),
                "fock_n" => {
                    initial_fock_n = Some((parse_usize(value, key, line)? as u32, line))
                }
                other => {
                    return Err(parse_error(
                        line,
                        format!("unknown key '{other}' in [initial]"),
                    ))
                }
            },
            Section::TimeGrid => match key {
                "t_max_over_gamma" => {
                    sc.time_grid.t_max_over_gamma = parse_f64(value, key, line)?;
                }
                "sample_count" => sc.time_grid.sample_count = parse_usize(value, key, line)?,
                other => {
                    return Err(parse_error(
                        line,
                        format!("unknown key '{other}' in [time_grid]"),
                    ))
                }
            },
            Section::Routes => match key {
                "closed_form" => sc.routes.closed_form = parse_bool(value, key, line)?,
                "exact" => sc.routes.exact = parse_bool(value, key, line)?,
                "fock" => sc.routes.fock = parse_bool(value, key, line)?,
                "fock_cutoff" => sc.fock_cutoff = parse_usize(value, key, line)?,
                "closed_form_detuning_rad_s" => {
                    sc.closed_form_detuning_override = Some(parse_f64(value, key, line)?);
                }
                other => {
                    return Err(parse_error(
                        line,
                        format!("unknown key '{other}' in [routes]"),
                    ))
                }
            },
            Section::Output => match key {
                "path" => sc.output_path = PathBuf::from(value),
                other => {
                    return Err(parse_error(
                        line,
                        format!("unknown key '{other}' in [output]"),
                    ))
                }
            },
        }
    }

    if keys_seen == 0 {
        return Err(Error::InvalidConfig("config file holds no keys".into()));
    }

    // Rebuild the initial preparation from the deferred keys.
    let kind = match &initial_kind {
        Some((k, line)) => match k.as_str() {
            "coherent" | "fock" => k.clone(),
            other => {
                return Err(parse_error(
                    *line,
                    format!("kind expects coherent or fock, got '{other}'"),
                ))
            }
        },
        None => match (&initial_alpha, &initial_fock_n, &sc.initial.resonant_kind) {
            (Some(_), Some((_, line)), _) => {
                return Err(parse_error(
                    *line,
                    "alpha and fock_n given without kind; set kind = coherent or fock",
                ))
            }
            (Some(_), None, _) => "coherent".to_string(),
            (None, Some(_), _) => "fock".to_string(),
            (None, None, ResonantKind::Coherent(_)) => "coherent".to_string(),
            (None, None, ResonantKind::Fock(_)) => "fock".to_string(),
        },
    };
    match kind.as_str() {
        "coherent" => {
            if let Some((_, line)) = initial_fock_n {
                return Err(parse_error(
                    line,
                    "fock_n applies to kind = fock, not kind = coherent",
                ));
            }
            let alpha = match initial_alpha {
                Some((a, _)) => a,
                None => match sc.initial.resonant_kind {
                    ResonantKind::Coherent(a) => a.re,
                    ResonantKind::Fock(_) => 2.0,
                },
            };
            sc.initial = InitialState::coherent_vacuum(Complex64::new(alpha, 0.0));
        }
        _ => {
            if let Some((_, line)) = initial_alpha {
                return Err(parse_error(
                    line,
                    "alpha applies to kind = coherent, not kind = fock",
                ));
            }
            let n = match initial_fock_n {
                Some((n, _)) => n,
                None => match sc.initial.resonant_kind {
                    ResonantKind::Fock(n) => n,
                    ResonantKind::Coherent(_) => 0,
                },
            };
            sc.initial = InitialState::fock_vacuum(n);
        }
    }

    if !saw_mode_volume {
        sc.physical.mode_volume =
            PhysicalConfig::default_mode_volume(sc.physical.resonant_angular_frequency);
    }
    if !saw_squid_position {
        sc.physical.squid_position = 0.5 * sc.physical.cavity_length;
    }
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn builtin_presets_validate_and_differ_where_intended() {
        let d = Scenario::builtin_default();
        d.validate().unwrap();
        assert!(d.routes.closed_form && d.routes.exact && !d.routes.fock);
        assert_eq!(d.bath.mode_count, 4801);
        assert_eq!(d.bath.half_bandwidth_over_gamma, Some(240.0));
        assert_eq!(d.time_grid.sample_count, 4001);

        let f = Scenario::builtin_fig2();
        f.validate().unwrap();
        assert!(f.routes.closed_form && !f.routes.exact);
        assert_eq!(f.output_path, PathBuf::from("fig2.csv"));

        let b = Scenario::builtin_dissipation_benchmark();
        b.validate().unwrap();
        assert_eq!(b.physical.classical_flux_phase, 0.0);
        assert_eq!(b.gamma_override, Some(1.0));
        assert!(matches!(b.initial.resonant_kind, ResonantKind::Fock(5)));
        assert_eq!(b.bath.mode_count, 401);

        let r = Scenario::builtin_rate_law();
        r.validate().unwrap();
        assert_eq!(r.closed_form_detuning_override, Some(0.0));
        assert!(r.routes.closed_form && !r.routes.exact);

        assert!(Scenario::builtin("no_such_preset").is_err());
    }

    #[test]
    fn default_decay_target_sits_below_the_branch_split() {
        let s = Scenario::builtin_default();
        let pull = branch_frequency_pull_magnitude(&s.physical).unwrap();
        let gamma = s.gamma_override.unwrap();
        assert_relative_eq!(gamma, pull / DEFAULT_GAMMA_PULL_RATIO, max_relative = 1e-15);
        // Effective decay at φ_c = π/4 is cos²(π/4) = 1/2 of the target, so
        // the branch split 2·pull is ≈ 95 effective linewidths.
        let split_over_gamma_eff = 2.0 * pull / (0.5 * gamma);
        assert_relative_eq!(split_over_gamma_eff, 95.2, max_relative = 1e-12);
    }

    #[test]
    fn canonical_form_round_trips() {
        for name in ["default", "fig2", "dissipation_benchmark", "rate_law"] {
            let s = Scenario::builtin(name).unwrap();
            let text = s.to_config_string();
            let reparsed = from_config_string(&text).unwrap();
            assert_eq!(text, reparsed.to_config_string(), "preset {name}");
        }
    }

    #[test]
    fn empty_or_comment_only_configs_are_rejected() {
        // A whole-file condition: no line number to point at.
        for text in ["", "\n\n", "# a comment\n\n# another\n"] {
            match from_config_string(text) {
                Err(Error::InvalidConfig(_)) => {}
                other => panic!("expected an invalid-config error, got {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_keys_and_sections_report_the_line() {
        match from_config_string("[physical]\nfrequency = 3\n") {
            Err(Error::ConfigParse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("frequency"), "{message}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        match from_config_string("\n[cavity]\n") {
            Err(Error::ConfigParse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("cavity"), "{message}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        match from_config_string("alpha = 2\n") {
            Err(Error::ConfigParse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected a parse error, got {other:?}"),
        }
        match from_config_string("[initial]\nalpha = two\n") {
            Err(Error::ConfigParse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("number"), "{message}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_overlay_keeps_the_remaining_defaults() {
        let s = from_config_string("[initial]\nalpha = 1.5\n").unwrap();
        match s.initial.resonant_kind {
            ResonantKind::Coherent(a) => assert_eq!(a, Complex64::new(1.5, 0.0)),
            ref other => panic!("unexpected kind {other:?}"),
        }
        let d = Scenario::builtin_default();
        assert_eq!(s.physical, d.physical);
        assert_eq!(s.bath, d.bath);
        assert_eq!(s.time_grid, d.time_grid);
    }

    #[test]
    fn units_convert_at_the_parse_boundary() {
        let text = "[physical]\nresonant_frequency_ghz = 45\ncharging_energy_uev = 176\n";
        let s = from_config_string(text).unwrap();
        assert_relative_eq!(
            s.physical.resonant_angular_frequency,
            2.0 * std::f64::consts::PI * 45e9,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            s.physical.charging_energy,
            176.0 * MICRO_EV,
            max_relative = 1e-15
        );
        // The default mode volume tracks the configured frequency …
        assert_relative_eq!(
            s.physical.mode_volume,
            PhysicalConfig::default_mode_volume(s.physical.resonant_angular_frequency),
            max_relative = 1e-15
        );
        // … unless set explicitly.
        let pinned = from_config_string(
            "[physical]\nresonant_frequency_ghz = 45\nmode_volume_m3 = 1e-9\n",
        )
        .unwrap();
        assert_eq!(pinned.physical.mode_volume, 1e-9);
    }

    #[test]
    fn initial_kind_conflicts_are_rejected() {
        assert!(matches!(
            from_config_string("[initial]\nkind = fock\nalpha = 2\n"),
            Err(Error::ConfigParse { .. })
        ));
        assert!(matches!(
            from_config_string("[initial]\nkind = coherent\nfock_n = 3\n"),
            Err(Error::ConfigParse { .. })
        ));
        assert!(matches!(
            from_config_string("[initial]\nalpha = 2\nfock_n = 3\n"),
            Err(Error::ConfigParse { .. })
        ));
        let s = from_config_string("[initial]\nkind = fock\nfock_n = 4\n").unwrap();
        assert!(matches!(s.initial.resonant_kind, ResonantKind::Fock(4)));
    }

    #[test]
    fn bandwidth_forms_are_mutually_exclusive() {
        let rel = from_config_string("[bath]\nhalf_bandwidth_over_gamma = 30\n").unwrap();
        assert_eq!(rel.bath.half_bandwidth_over_gamma, Some(30.0));
        assert_eq!(rel.bath.half_bandwidth_rad_s, None);
        let abs = from_config_string("[bath]\nhalf_bandwidth_rad_s = 55\n").unwrap();
        assert_eq!(abs.bath.half_bandwidth_rad_s, Some(55.0));
        assert_eq!(abs.bath.half_bandwidth_over_gamma, None);
        let spec = abs.bath.resolve(1.0).unwrap();
        assert_eq!(spec.half_bandwidth, 55.0);
        let spec = rel.bath.resolve(2.0).unwrap();
        assert_eq!(spec.half_bandwidth, 60.0);
        // Both forms in one file is a contradiction, reported at the line
        // of the second form regardless of order.
        let both = "[bath]\nhalf_bandwidth_over_gamma = 30\nhalf_bandwidth_rad_s = 55\n";
        assert!(matches!(
            from_config_string(both),
            Err(Error::ConfigParse { line: 3, .. })
        ));
        let both = "[bath]\nhalf_bandwidth_rad_s = 55\nhalf_bandwidth_over_gamma = 30\n";
        assert!(matches!(
            from_config_string(both),
            Err(Error::ConfigParse { line: 3, .. })
        ));
    }


    #[test]
    fn scenario_invariants_are_enforced() {
        let mut s = Scenario::builtin_default();
        s.time_grid.sample_count = 1;
        assert!(matches!(s.validate(), Err(Error::InvalidConfig(_))));

        let mut s = Scenario::builtin_default();
        s.routes = Routes {
            closed_form: false,
            exact: false,
            fock: false,
        };
        assert!(matches!(s.validate(), Err(Error::InvalidConfig(_))));

        let mut s = Scenario::builtin_default();
        s.routes.fock = true;
        s.routes.exact = false;
        assert!(matches!(s.validate(), Err(Error::InvalidConfig(_))));

        let mut s = Scenario::builtin_default();
        s.gamma_override = Some(-1.0);
        assert!(matches!(s.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn sweep_keys_mutate_the_right_fields() {
        let mut s = Scenario::builtin_default();
        s.set_numeric("initial.alpha", 3.0).unwrap();
        assert!(matches!(
            s.initial.resonant_kind,
            ResonantKind::Coherent(a) if a == Complex64::new(3.0, 0.0)
        ));
        s.set_numeric("initial.fock_n", 5.0).unwrap();
        assert!(matches!(s.initial.resonant_kind, ResonantKind::Fock(5)));
        s.set_numeric("bath.mode_count", 801.0).unwrap();
        assert_eq!(s.bath.mode_count, 801);
        assert!(matches!(
            s.set_numeric("bath.mode_count", 801.5),
            Err(Error::InvalidConfig(_))
        ));
        s.set_numeric("bath.half_bandwidth_rad_s", 77.0).unwrap();
        assert_eq!(s.bath.half_bandwidth_over_gamma, None);
        match s.set_numeric("bath.spacing", 1.0) {
            Err(Error::UnknownSweepKey { key, valid }) => {
                assert_eq!(key, "bath.spacing");
                assert!(valid.contains("initial.alpha"));
            }
            other => panic!("expected an unknown-key error, got {other:?}"),
        }
    }

    proptest! {
        /// The canonical rendering is a fixed point of parse → render.
        #[test]
        fn canonical_form_is_a_parse_fixed_point(
            alpha in 0.0f64..4.0,
            t_max in 0.5f64..30.0,
            samples in 2usize..5000,
            modes in 2usize..10_000,
            phase in -3.0f64..3.0,
        ) {
            let mut s = Scenario::builtin_default();
            s.initial = InitialState::coherent_vacuum(Complex64::new(alpha, 0.0));
            s.time_grid = TimeGrid { t_max_over_gamma: t_max, sample_count: samples };
            s.bath.mode_count = modes;
            s.physical.classical_flux_phase = phase;
            let text = s.to_config_string();
            let reparsed = from_config_string(&text).unwrap();
            prop_assert_eq!(text, reparsed.to_config_string());
        }
    }
}
