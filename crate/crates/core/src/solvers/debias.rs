use num_complex::Complex64;

use super::lsqr::{lsqr, LsqrResult};
use super::{check_meas, Reconstruction, RecoveryConfig};
use crate::kspace::Measurements;
use crate::transforms::MeasurementOperator;
use crate::{Error, Result};

/// Coefficients below this fraction of the largest magnitude count as zero.
pub const SUPPORT_CUTOFF: f64 = 1e-8;

/// Indices with `|alpha_j| > SUPPORT_CUTOFF * max |alpha|`.
pub fn support_of(alpha: &[Complex64]) -> Vec<usize> {
    let max = alpha.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    let cut = SUPPORT_CUTOFF * max;
    alpha
        .iter()
        .enumerate()
        .filter_map(|(j, z)| (z.norm() > cut).then_some(j))
        .collect()
}

/// Minimum-norm least-squares fit of `y` using only the columns in `support`.
pub(crate) fn fit_on_support(
    op: &MeasurementOperator,
    y: &[Complex64],
    support: &[usize],
    config: &RecoveryConfig,
) -> (Vec<Complex64>, LsqrResult) {
    let n = op.n();
    let zero = Complex64::new(0.0, 0.0);
    let embed = |z: &[Complex64]| {
        let mut full = vec![zero; n];
        for (&j, &v) in support.iter().zip(z) {
            full[j] = v;
        }
        full
    };
    let res = lsqr(
        |z| op.apply_slice(&embed(z)),
        |r| {
            let full = op.adjoint_slice(r);
            support.iter().map(|&j| full[j]).collect()
        },
        y,
        support.len(),
        config.lsqr_tol,
        config.lsqr_maxiter,
    );
    (embed(&res.x), res)
}

/// Ordinary least squares restricted to `support`, removing the shrinkage
/// bias of l1 estimates.
pub fn debias(
    meas: &Measurements,
    op: &MeasurementOperator,
    support: &[usize],
    config: &RecoveryConfig,
) -> Result<Reconstruction> {
    check_meas(meas, op)?;
    if let Some(&bad) = support.iter().find(|&&j| j >= op.n()) {
        return Err(Error::input(format!("support index {bad} out of range")));
    }
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    let (alpha, res) = fit_on_support(op, &meas.values, &support, config);
    let mut rec = Reconstruction::from_coeffs(op, alpha, &meas.values);
    rec.support = Some(support);
    rec.iterations = res.iterations;
    rec.converged = res.converged;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::{generate_mask, Pattern};
    use crate::rng;
    use crate::solvers::recover_cs;
    use crate::transforms::{Family, WaveletBasis};
    use crate::norm2;

    fn instance(key: u64) -> (MeasurementOperator, Vec<Complex64>, Vec<usize>) {
        let mask = generate_mask(Pattern::Gaussian, (32, 32), 0.6, key).unwrap();
        let op = MeasurementOperator::new(mask, WaveletBasis::new(Family::Db4, 2)).unwrap();
        let mut alpha = vec![Complex64::new(0.0, 0.0); op.n()];
        let support = vec![0, 5, 17, 40, 66, 130];
        let g = rng::normal_pairs(key, support.len());
        for (&j, (a, b)) in support.iter().zip(g) {
            alpha[j] = Complex64::new(a, b) + Complex64::new(2.0 * a.signum(), 0.0);
        }
        (op, alpha, support)
    }

    #[test]
    fn support_cutoff() {
        let v = [Complex64::new(1.0, 0.0), Complex64::new(1e-9, 0.0), Complex64::new(0.0, 2e-8), Complex64::new(0.0, 0.0)];
        assert_eq!(support_of(&v), vec![0, 2]);
        assert!(support_of(&[Complex64::new(0.0, 0.0); 3]).is_empty());
    }

    #[test]
    fn empty_support_gives_zero() {
        let (op, alpha, _) = instance(1);
        let y = Measurements { values: op.apply_slice(&alpha), mask_id: 0 };
        let r = debias(&y, &op, &[], &RecoveryConfig::default()).unwrap();
        assert!(r.image.iter().all(|z| z.norm() == 0.0));
        assert!(debias(&y, &op, &[op.n()], &RecoveryConfig::default()).is_err());
    }

    #[test]
    fn true_support_exact() {
        let (op, alpha, support) = instance(2);
        let y = Measurements { values: op.apply_slice(&alpha), mask_id: 0 };
        let cfg = RecoveryConfig { lsqr_tol: 1e-12, ..Default::default() };
        let r = debias(&y, &op, &support, &cfg).unwrap();
        assert!(r.converged);
        let est = r.coeffs.unwrap();
        let err = est.values.iter().zip(&alpha).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn idempotent_on_own_support() {
        let (op, alpha, support) = instance(3);
        let noise: Vec<Complex64> = rng::normal_pairs(5, op.m()).into_iter().map(|(a, b)| Complex64::new(a, b) * 0.05).collect();
        let y = Measurements { values: op.apply_slice(&alpha).iter().zip(&noise).map(|(a, b)| a + b).collect(), mask_id: 0 };
        let cfg = RecoveryConfig::default();
        let first = debias(&y, &op, &support, &cfg).unwrap();
        let again = debias(&y, &op, first.support.as_ref().unwrap(), &cfg).unwrap();
        let d = first.coeffs.unwrap().values.iter().zip(again.coeffs.unwrap().values.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-10);
    }

    #[test]
    fn removes_shrinkage() {
        let cfg = RecoveryConfig::default();
        for key in 0..3 {
            let (op, alpha, _) = instance(10 + key);
            let noise: Vec<Complex64> = rng::normal_pairs(key, op.m()).into_iter().map(|(a, b)| Complex64::new(a, b) * 0.02).collect();
            let y = Measurements { values: op.apply_slice(&alpha).iter().zip(&noise).map(|(a, b)| a + b).collect(), mask_id: 0 };
            let cs = recover_cs(&y, &op, norm2(&noise), &cfg).unwrap();
            let cs_alpha = cs.coeffs.unwrap();
            let supp = support_of(cs_alpha.values.as_slice().unwrap());
            let deb = debias(&y, &op, &supp, &cfg).unwrap();
            let n_cs = norm2(cs_alpha.values.as_slice().unwrap());
            let n_deb = norm2(deb.coeffs.unwrap().values.as_slice().unwrap());
            assert!(n_deb >= n_cs, "{n_deb} < {n_cs}");
        }
    }
}
