//! Basis pursuit denoising, `min ||alpha||_1 s.t. ||Phi alpha - y|| <= eta`,
//! by Douglas-Rachford splitting.
//!
//! The two proximal steps are soft thresholding and the projection onto the
//! feasible set. Because `Phi` has orthonormal rows the projection is exact:
//! move `Phi alpha` to the nearest point of the ball around `y` and leave the
//! null-space component untouched.

use num_complex::Complex64;

use super::{check_meas, Reconstruction, RecoveryConfig};
use crate::kspace::Measurements;
use crate::transforms::MeasurementOperator;
use crate::{norm2, Error, Result};

/// Step size relative to `max |Phi* y|` when none is configured. The
/// iteration count depends strongly on it and the best value grows with the
/// relative noise level, roughly as its square root.
pub fn default_step_scale(eta: f64, y_norm: f64) -> f64 {
    if eta <= 0.0 || y_norm <= 0.0 {
        return 0.1;
    }
    (0.15 * (eta / y_norm).sqrt()).clamp(1e-3, 0.1)
}

/// Splitting state, reusable as a warm start for nearby data.
#[derive(Debug, Clone, PartialEq)]
pub struct CsState {
    pub z: Vec<Complex64>,
    pub gamma: f64,
}

fn soft(z: &[Complex64], gamma: f64, out: &mut [Complex64]) {
    for (o, v) in out.iter_mut().zip(z) {
        let m = v.norm();
        *o = if m > gamma { *v * (1.0 - gamma / m) } else { Complex64::new(0.0, 0.0) };
    }
}

fn l1(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Projects `v` onto `{alpha : ||Phi alpha - y|| <= eta}`.
fn project(op: &MeasurementOperator, v: &[Complex64], y: &[Complex64], eta: f64) -> Vec<Complex64> {
    let pv = op.apply_slice(v);
    let r: Vec<Complex64> = pv.iter().zip(y).map(|(a, b)| a - b).collect();
    let nr = norm2(&r);
    if nr <= eta {
        return v.to_vec();
    }
    let shrink = eta / nr;
    // c - Phi v where c = y + r * shrink.
    let delta: Vec<Complex64> = r.iter().map(|ri| ri * (shrink - 1.0)).collect();
    let back = op.adjoint_slice(&delta);
    v.iter().zip(back).map(|(a, b)| a + b).collect()
}

pub fn recover_cs(meas: &Measurements, op: &MeasurementOperator, eta: f64, config: &RecoveryConfig) -> Result<Reconstruction> {
    recover_cs_warm(meas, op, eta, config, None).map(|(r, _)| r)
}

/// As [`recover_cs`], optionally continuing from a previous splitting state.
/// Returns the final state for further warm starts.
pub fn recover_cs_warm(
    meas: &Measurements,
    op: &MeasurementOperator,
    eta: f64,
    config: &RecoveryConfig,
    warm: Option<&CsState>,
) -> Result<(Reconstruction, CsState)> {
    check_meas(meas, op)?;
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::input(format!("eta must be finite and >= 0, got {eta}")));
    }
    let y = &meas.values;
    let n = op.n();
    let zero = vec![Complex64::new(0.0, 0.0); n];
    if norm2(y) <= eta {
        let state = CsState { z: zero.clone(), gamma: 0.0 };
        return Ok((Reconstruction::from_coeffs(op, zero, y), state));
    }
    let (mut z, gamma) = match warm {
        Some(s) if s.z.len() == n && s.gamma > 0.0 => (s.z.clone(), s.gamma),
        _ => {
            let z = op.adjoint_slice(y);
            let scale = config.cs_step.unwrap_or_else(|| default_step_scale(eta, norm2(y)));
            let g = scale * z.iter().map(|v| v.norm()).fold(0.0, f64::max);
            (z, g)
        }
    };

    let mut a = zero.clone();
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut last = zero;
    for it in 1..=config.solver_maxiter {
        iterations = it;
        soft(&z, gamma, &mut a);
        let v: Vec<Complex64> = a.iter().zip(&z).map(|(ai, zi)| ai * 2.0 - zi).collect();
        let b = project(op, &v, y, eta);
        let mut diff = 0.0;
        for ((zi, bi), ai) in z.iter_mut().zip(&b).zip(&a) {
            let d = bi - ai;
            diff += d.norm_sqr();
            *zi += d;
        }
        let scale = norm2(&b).max(norm2(&a)).max(f64::MIN_POSITIVE);
        // The thresholded iterate is exactly sparse; at the fixed point it
        // coincides with the feasible one.
        let obj = l1(&a);
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, a.clone()));
        }
        last.copy_from_slice(&a);
        if diff.sqrt() <= config.solver_tol * scale {
            converged = true;
            break;
        }
    }
    let alpha = if converged { last } else { best.map(|(_, b)| b).unwrap_or(last) };
    let mut rec = Reconstruction::from_coeffs(op, alpha, y);
    rec.iterations = iterations;
    rec.converged = converged;
    if !converged {
        log::warn!("cs: no convergence after {iterations} iterations");
    }
    Ok((rec, CsState { z, gamma }))
}
