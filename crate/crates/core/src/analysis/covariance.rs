//! Covariance estimates and their small-noise limits.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use super::kernels::{circulant_entry, kernel_k_omega};
use crate::flow_model::ComplexImageSet;
use crate::kspace::Measurements;
use crate::masks::SamplingMask;
use crate::{norm2, CGrid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    Empirical,
    KOmega,
    KMu,
    KMuX,
    JacobianLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovValues {
    /// Dense `n x n` matrices over row-major pixel indices. `pseudo` holds
    /// `E[d(p) d(q)]`; `None` means it vanishes.
    Matrix {
        cov: Array2<Complex64>,
        pseudo: Option<Array2<Complex64>>,
    },
    /// Circulant covariance generated by a displacement kernel; the
    /// pseudo-covariance is zero.
    Kernel(CGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub values: CovValues,
    pub kind: CovKind,
    /// Standard errors of the real and imaginary parts of `cov` entries, for
    /// empirical estimates.
    pub stderr: Option<Array2<f64>>,
}

impl CovarianceEstimate {
    pub fn from_kernel(kind: CovKind, kernel: CGrid) -> Self {
        Self { values: CovValues::Kernel(kernel), kind, stderr: None }
    }

    /// `Cov(x(p), x(q)) = E[d(p) conj d(q)]`.
    pub fn cov(&self, p: usize, q: usize) -> Complex64 {
        match &self.values {
            CovValues::Matrix { cov, .. } => cov[[p, q]],
            CovValues::Kernel(k) => circulant_entry(k, p, q),
        }
    }

    /// `E[d(p) d(q)]`.
    pub fn pseudo(&self, p: usize, q: usize) -> Complex64 {
        match &self.values {
            CovValues::Matrix { pseudo: Some(ps), .. } => ps[[p, q]],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Dense covariance matrix.
    pub fn matrix(&self) -> Array2<Complex64> {
        match &self.values {
            CovValues::Matrix { cov, .. } => cov.clone(),
            CovValues::Kernel(k) => super::kernels::circulant_matrix(k),
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        let c = Complex64::new(s, 0.0);
        match &mut self.values {
            CovValues::Matrix { cov, pseudo } => {
                cov.mapv_inplace(|z| z * c);
                if let Some(p) = pseudo {
                    p.mapv_inplace(|z| z * c);
                }
            }
            CovValues::Kernel(k) => k.mapv_inplace(|z| z * c),
        }
        if let Some(e) = &mut self.stderr {
            e.mapv_inplace(|v| v * s.abs());
        }
        self
    }
}

/// Small-noise limit `sigma^-2 Cov` of least-l2 recovery with a fixed mask:
/// `2 (m/n) K_Omega`.
pub fn l2_noise_limit(mask: &SamplingMask) -> Result<CovarianceEstimate> {
    let (rows, cols) = mask.shape();
    let scale = 2.0 * mask.count() as f64 / (rows * cols) as f64;
    Ok(CovarianceEstimate::from_kernel(CovKind::KOmega, kernel_k_omega(mask)?).scaled(scale))
}

/// Sample covariance and pseudo-covariance of flattened realizations.
pub fn empirical_covariance(samples: &[Vec<Complex64>]) -> Result<CovarianceEstimate> {
    let nn = samples.len();
    if nn < 2 {
        return Err(Error::input("covariance needs at least two samples"));
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(Error::input("samples differ in length"));
    }
    let mut dev = Array2::<Complex64>::zeros((nn, n));
    for (mut row, s) in dev.axis_iter_mut(Axis(0)).zip(samples) {
        row.assign(&ndarray::ArrayView1::from(s));
    }
    let mean = dev.mean_axis(Axis(0)).expect("nonempty");
    dev -= &mean;
    let denom = Complex64::new((nn - 1) as f64, 0.0);
    let conj = dev.mapv(|z| z.conj());
    let cov = dev.t().dot(&conj) / denom;
    let pseudo = dev.t().dot(&dev) / denom;

    // Standard error of each entry from the spread of the products.
    let mut sq = Array2::<f64>::zeros((n, n));
    for row in dev.axis_iter(Axis(0)) {
        for p in 0..n {
            for q in 0..n {
                let u = row[p] * row[q].conj() - cov[[p, q]];
                sq[[p, q]] += u.norm_sqr();
            }
        }
    }
    let stderr = sq.mapv(|s| (s / ((nn - 1) as f64 * nn as f64)).sqrt());
    Ok(CovarianceEstimate {
        values: CovValues::Matrix { cov, pseudo: Some(pseudo) },
        kind: CovKind::Empirical,
        stderr: Some(stderr),
    })
}

/// Estimates `lim sigma^-2 Cov(x_hat)` for complex Gaussian noise of variance
/// `sigma^2` per real component, by central differences of `solver` around
/// `meas`.
///
/// Each measurement gets a real and an imaginary probe of size `probe_scale`
/// (default `1e-6 ||y||`). With `d_re`, `d_im` the resulting directional
/// derivatives, the limit is `sum (d_re d_re^* + d_im d_im^*)`, which equals
/// `2 D D^*` for a holomorphic solver; the pseudo-covariance uses transposes.
pub fn jacobian_covariance_limit<S>(solver: S, meas: &Measurements, probe_scale: Option<f64>) -> Result<CovarianceEstimate>
where
    S: Fn(&Measurements) -> Result<Vec<Complex64>> + Sync,
{
    let m = meas.len();
    if m == 0 {
        return Err(Error::input("no measurements to probe"));
    }
    let h = match probe_scale {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::input(format!("probe scale must be positive, got {h}"))),
        None => {
            let s = 1e-6 * norm2(&meas.values);
            if s > 0.0 {
                s
            } else {
                1e-6
            }
        }
    };
    let base = solver(meas)?;
    if solver(meas)? != base {
        return Err(Error::Nondeterministic);
    }
    let n = base.len();
    let columns: Vec<Vec<Complex64>> = (0..2 * m)
        .into_par_iter()
        .map(|k| {
            let dir = if k < m { Complex64::new(h, 0.0) } else { Complex64::new(0.0, h) };
            let j = k % m;
            let mut plus = meas.clone();
            plus.values[j] += dir;
            let mut minus = meas.clone();
            minus.values[j] -= dir;
            let (a, b) = (solver(&plus)?, solver(&minus)?);
            if a.len() != n || b.len() != n {
                return Err(Error::input("solver output length changed"));
            }
            Ok(a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * h)).collect())
        })
        .collect::<Result<_>>()?;
    let mut d = Array2::<Complex64>::zeros((n, 2 * m));
    for (k, col) in columns.iter().enumerate() {
        d.column_mut(k).assign(&ndarray::ArrayView1::from(col));
    }
    let cov = d.dot(&d.t().mapv(|z| z.conj()));
    let pseudo = d.dot(&d.t());
    Ok(CovarianceEstimate {
        values: CovValues::Matrix { cov, pseudo: Some(pseudo) },
        kind: CovKind::JacobianLimit,
        stderr: None,
    })
}

/// Covariance limits of density and velocity at a pixel pair.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VelocityCovEntry {
    pub p: usize,
    pub q: usize,
    pub rho_rho: f64,
    /// `cov(rho(p), v_k(q))`.
    pub rho_v: [f64; 3],
    /// `cov(v_k(p), rho(q))`.
    pub v_rho: [f64; 3],
    /// `cov(v_k(p), v_l(q))`.
    pub v_v: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCovLimit {
    pub entries: Vec<VelocityCovEntry>,
    /// Pairs skipped because an image vanishes at one of the pixels.
    pub excluded: Vec<(usize, usize)>,
}

/// Second moments of `a = e^{-i theta_p} d(p)` and `b = e^{-i theta_q} d(q)`:
/// returns `(cov(Re a, Re b), cov(Im a, Im b), cov(Re a, Im b), cov(Im a, Re b))`.
fn rotated_moments(c: &CovarianceEstimate, x: &[Complex64], p: usize, q: usize) -> (f64, f64, f64, f64) {
    let up = Complex64::from_polar(1.0, -x[p].arg());
    let uq = Complex64::from_polar(1.0, -x[q].arg());
    let ab_conj = up * uq.conj() * c.cov(p, q);
    let ab = up * uq * c.pseudo(p, q);
    (
        0.5 * (ab_conj + ab).re,
        0.5 * (ab_conj - ab).re,
        0.5 * (ab.im - ab_conj.im),
        0.5 * (ab.im + ab_conj.im),
    )
}

/// Linearised covariance of density and velocities from the covariance
/// limits of the four independently reconstructed images.
///
/// With `a_k = e^{-i theta_k} dx_k`, the perturbations are `d rho = Re a_0`
/// and `d v_k = venc/pi (Im a_k / |x_k| - Im a_0 / rho)`; images are assumed
/// uncorrelated with each other.
pub fn velocity_cov_limit(
    limits: &[CovarianceEstimate; 4],
    noiseless: &ComplexImageSet,
    venc: f64,
    pairs: &[(usize, usize)],
) -> Result<VelocityCovLimit> {
    if !(venc > 0.0) {
        return Err(Error::input("venc must be positive"));
    }
    let flat: Vec<Vec<Complex64>> = noiseless.x.iter().map(|g| g.iter().copied().collect()).collect();
    let n = flat[0].len();
    let s = venc / std::f64::consts::PI;
    let mut out = VelocityCovLimit { entries: Vec::new(), excluded: Vec::new() };
    for &(p, q) in pairs {
        if p >= n || q >= n {
            return Err(Error::input(format!("pixel pair ({p}, {q}) out of range")));
        }
        if flat.iter().any(|x| x[p].norm() == 0.0 || x[q].norm() == 0.0) {
            out.excluded.push((p, q));
            continue;
        }
        let mag = |k: usize, r: usize| flat[k][r].norm();
        let (rr0, ii0, ri0, ir0) = rotated_moments(&limits[0], &flat[0], p, q);
        let (rp, rq) = (mag(0, p), mag(0, q));
        let mut e = VelocityCovEntry {
            p,
            q,
            rho_rho: rr0,
            rho_v: [-s * ri0 / rq; 3],
            v_rho: [-s * ir0 / rp; 3],
            v_v: [[s * s * ii0 / (rp * rq); 3]; 3],
        };
        for k in 1..4 {
            let (_, iik, _, _) = rotated_moments(&limits[k], &flat[k], p, q);
            e.v_v[k - 1][k - 1] += s * s * iik / (mag(k, p) * mag(k, q));
        }
        out.entries.push(e);
    }
    Ok(out)
}
