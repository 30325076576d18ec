use num_complex::Complex64;

use super::debias::fit_on_support;
use super::{check_meas, Reconstruction, RecoveryConfig};
use crate::kspace::Measurements;
use crate::transforms::MeasurementOperator;
use crate::{norm2, Error, Result};

/// Stagewise orthogonal matching pursuit.
///
/// Each stage adds every coefficient whose correlation with the residual
/// reaches `factor * ||r|| / sqrt(m)`, then refits by least squares on the
/// accumulated support. Stops after `stomp_iters` stages, when a sweep adds
/// nothing, or when `||r|| <= solver_tol * ||y||`.
pub fn recover_stomp(meas: &Measurements, op: &MeasurementOperator, config: &RecoveryConfig) -> Result<Reconstruction> {
    check_meas(meas, op)?;
    config.validate()?;
    let m = op.m();
    if m == 0 {
        return Err(Error::input("stOMP needs at least one measurement"));
    }
    let y = &meas.values;
    let n = op.n();
    let ynorm = norm2(y);
    let mut alpha = vec![Complex64::new(0.0, 0.0); n];
    let mut in_support = vec![false; n];
    let mut support: Vec<usize> = Vec::new();
    let mut r: Vec<Complex64> = y.clone();
    let mut rnorm = ynorm;
    let mut converged = true;
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < config.stomp_iters && rnorm > config.solver_tol * ynorm {
        let corr = op.adjoint_slice(&r);
        let thresh = config.stomp_threshold_factor * rnorm / (m as f64).sqrt();
        let before = support.len();
        for (j, c) in corr.iter().enumerate() {
            if !in_support[j] && c.norm() >= thresh {
                in_support[j] = true;
                support.push(j);
            }
        }
        if support.len() == before {
            break;
        }
        iterations += 1;
        support.sort_unstable();
        let (fit, res) = fit_on_support(op, y, &support, config);
        converged &= res.converged;
        alpha = fit;
        let pred = op.apply_slice(&alpha);
        r = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        rnorm = norm2(&r);
        history.push((support.len(), rnorm));
    }

    let mut rec = Reconstruction::from_coeffs(op, alpha, y);
    rec.support = Some(support);
    rec.iterations = iterations;
    rec.converged = converged;
    rec.history = history;
    Ok(rec)
}
