//! Reconstruction algorithms: zero-filled least-l2, l1 basis pursuit
//! denoising (CS), debiased CS, stagewise OMP, and LSQR.

mod cs;
mod debias;
mod l2;
mod lsqr;
mod stomp;

use std::fmt;
use std::str::FromStr;

pub use cs::{default_step_scale, recover_cs, recover_cs_warm, CsState};
pub use debias::{debias, support_of, SUPPORT_CUTOFF};
pub use l2::recover_l2;
pub use lsqr::{lsqr, LsqrResult};
pub use stomp::recover_stomp;

use num_complex::Complex64;

use crate::kspace::{residual_threshold, Measurements};
use crate::transforms::{MeasurementOperator, WaveletCoeffs};
use crate::{CGrid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    L2,
    Cs,
    Csdeb,
    Stomp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::L2, Method::Cs, Method::Csdeb, Method::Stomp];

    pub fn name(self) -> &'static str {
        match self {
            Method::L2 => "l2",
            Method::Cs => "cs",
            Method::Csdeb => "csdeb",
            Method::Stomp => "stomp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::input(format!("unknown recovery method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    pub method: Method,
    /// Residual bound for cs/csdeb.
    pub eta: f64,
    pub stomp_iters: usize,
    pub stomp_threshold_factor: f64,
    pub lsqr_tol: f64,
    pub lsqr_maxiter: usize,
    /// Relative fixed-point tolerance of the CS iteration, and relative
    /// residual at which stOMP stops early.
    pub solver_tol: f64,
    pub solver_maxiter: usize,
    /// CS step size relative to `max |Phi* y|`; chosen from the relative
    /// noise level when absent.
    pub cs_step: Option<f64>,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            method: Method::Cs,
            eta: 0.0,
            stomp_iters: 10,
            stomp_threshold_factor: 2.0,
            lsqr_tol: 1e-8,
            lsqr_maxiter: 2000,
            solver_tol: 1e-8,
            solver_maxiter: 20_000,
            cs_step: None,
        }
    }
}

impl RecoveryConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::input(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if self.stomp_iters == 0 {
            return Err(Error::input("stomp_iters must be >= 1"));
        }
        if !(self.stomp_threshold_factor > 0.0) {
            return Err(Error::input("stomp_threshold_factor must be positive"));
        }
        if self.lsqr_maxiter == 0 || self.solver_maxiter == 0 {
            return Err(Error::input("iteration limits must be >= 1"));
        }
        if let Some(s) = self.cs_step {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::input(format!("cs_step must be positive, got {s}")));
            }
        }
        if !(self.lsqr_tol > 0.0) || !(self.solver_tol > 0.0) {
            return Err(Error::input("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Default residual bound: the 95% radius of the measurement noise, or 0
/// without noise.
pub fn default_eta(m: usize, sigma: f64) -> Result<f64> {
    if sigma == 0.0 || m == 0 {
        return Ok(0.0);
    }
    residual_threshold(m, 0.05, sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub image: CGrid,
    /// Wavelet coefficients; absent for l2 recovery.
    pub coeffs: Option<WaveletCoeffs>,
    /// Coefficient support (row-major indices) for csdeb and stomp.
    pub support: Option<Vec<usize>>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// False when an iteration limit was hit; the result is then the best
    /// iterate available.
    pub converged: bool,
    /// stOMP only: `(support size, residual norm)` after each iteration.
    pub history: Vec<(usize, f64)>,
}

impl Reconstruction {
    pub(crate) fn from_coeffs(op: &MeasurementOperator, alpha: Vec<Complex64>, y: &[Complex64]) -> Self {
        let residual_norm = residual(op, &alpha, y);
        Self {
            image: op.image(&alpha),
            coeffs: Some(op.coeffs(alpha)),
            support: None,
            residual_norm,
            iterations: 0,
            converged: true,
            history: Vec::new(),
        }
    }

    pub fn flagged(&self) -> bool {
        !self.converged
    }
}

pub(crate) fn residual(op: &MeasurementOperator, alpha: &[Complex64], y: &[Complex64]) -> f64 {
    op.apply_slice(alpha)
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn check_meas(meas: &Measurements, op: &MeasurementOperator) -> Result<()> {
    if meas.len() != op.m() {
        return Err(Error::input(format!(
            "{} measurements given, the mask samples {}",
            meas.len(),
            op.m()
        )));
    }
    Ok(())
}

/// Runs the method selected in `config`.
pub fn reconstruct(meas: &Measurements, op: &MeasurementOperator, config: &RecoveryConfig) -> Result<Reconstruction> {
    config.validate()?;
    match config.method {
        Method::L2 => recover_l2(meas, &op.mask),
        Method::Cs => recover_cs(meas, op, config.eta, config),
        Method::Csdeb => {
            let cs = recover_cs(meas, op, config.eta, config)?;
            let alpha = cs.coeffs.as_ref().expect("cs returns coefficients");
            let support = support_of(alpha.values.as_slice().expect("standard layout"));
            let mut deb = debias(meas, op, &support, config)?;
            deb.converged &= cs.converged;
            deb.iterations += cs.iterations;
            Ok(deb)
        }
        Method::Stomp => recover_stomp(meas, op, config),
    }
}
