// Copyright 2026 Quasimode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library and CLI.
///
/// The CLI maps these onto process exit codes: configuration problems
/// (parsing, invalid values) exit with 2, physics guard violations with 3,
/// and validation failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical parameter is outside its allowed domain.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A bath parameter is outside its allowed domain.
    #[error("invalid bath: {0}")]
    InvalidBath(String),

    /// Grid spacing too coarse to resolve the target decay rate
    /// (dense-bath condition Δω < γ/5 violated).
    #[error(
        "dense-bath violation: grid spacing {spacing:.6e} rad/s is not below \
         γ/5 = {limit:.6e} rad/s"
    )]
    DenseBathViolation { spacing: f64, limit: f64 },

    /// Requested times extend past half the discrete-bath revival time,
    /// where Poincaré recurrences invalidate the open-system picture.
    #[error(
        "horizon guard: requested t_max {t_max:.6e} s exceeds half the bath \
         revival time {revival:.6e} s / 2"
    )]
    HorizonGuard { t_max: f64, revival: f64 },

    /// The displacement linear system is singular.
    #[error(
        "degenerate forcing: displacement denominator ħΩ − Σ g_j²/(ħω_j) \
         vanishes ({denominator:.6e} J)"
    )]
    DegenerateForcing { denominator: f64 },

    /// A brute-force instance exceeds the dense-solver size guard.
    #[error("instance too large: dimension {dim} exceeds limit {limit}")]
    InstanceTooLarge { dim: usize, limit: usize },

    /// Coherent-state truncation tail above the configured cutoff is too fat.
    #[error(
        "truncation error: coherent tail {tail:.3e} above cutoff n_max = \
         {n_max} exceeds bound {bound:.1e} for amplitude |α| = {amp:.3}"
    )]
    TruncationTail {
        tail: f64,
        n_max: usize,
        amp: f64,
        bound: f64,
    },

    /// Array lengths disagree between coupled inputs.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Two time series were combined on different grids.
    #[error("time grids differ: {0}")]
    TimeGridMismatch(String),

    /// Not enough early-time samples to fit a decoherence rate.
    #[error(
        "insufficient samples: short-time window holds {got} samples, \
         need at least {need}"
    )]
    InsufficientSamples { got: usize, need: usize },

    /// Scenario config file could not be parsed.
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    /// Sweep key does not name a numeric scenario field.
    #[error("unknown sweep key `{key}`; valid keys: {valid}")]
    UnknownSweepKey { key: String, valid: String },

    /// Numerical linear algebra backend failure.
    #[error("linear algebra error: {0}")]
    Linalg(String),

    /// Filesystem failure while reading configs or writing results.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_)
            | Error::InvalidBath(_)
            | Error::ConfigParse { .. }
            | Error::UnknownSweepKey { .. } => 2,
            Error::DenseBathViolation { .. }
            | Error::HorizonGuard { .. }
            | Error::DegenerateForcing { .. }
            | Error::InstanceTooLarge { .. }
            | Error::TruncationTail { .. }
            | Error::ShapeMismatch(_)
            | Error::TimeGridMismatch(_)
            | Error::InsufficientSamples { .. } => 3,
            Error::Linalg(_) | Error::Io { .. } => 4,
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
