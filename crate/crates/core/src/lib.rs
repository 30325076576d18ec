//! Reconstruction of phase-contrast 4D-flow images from noisy, randomly
//! undersampled k-space, and statistics of the resulting reconstruction noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`flow_model`] maps density/velocity fields to the four complex images and back.
//! * [`kspace`] holds the unitary Fourier transform, sampling and noise injection.
//! * [`masks`] draws random sampling sets from variable-density patterns.
//! * [`transforms`] provides orthogonal wavelets and the measurement operator
//!   `Phi = F_Omega W^-1`.
//! * [`solvers`] contains least-l2, l1 (CS), debiased CS, stagewise OMP and LSQR.
//! * [`analysis`] computes error metrics, correlation curves and covariance kernels.
//! * [`ensemble`] runs Monte Carlo experiments and persists them.
//! * [`gridfile`] is the binary grid container shared with the command line tool.

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod flow_model;
pub mod gridfile;
pub mod kspace;
pub mod masks;
pub mod rng;
pub mod solvers;
pub mod transforms;

pub use error::{Error, Result};

use ndarray::Array2;
use num_complex::Complex64;

/// Complex image or k-space grid, indexed `[row, col]`.
pub type CGrid = Array2<Complex64>;
/// Real-valued grid.
pub type RGrid = Array2<f64>;
/// Boolean grid (masks).
pub type BGrid = Array2<bool>;

/// Grid dimensions as `(rows, cols)`.
pub type Shape = (usize, usize);

pub(crate) fn check_same_shape(what: &str, a: Shape, b: Shape) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Squared l2 norm of a complex slice.
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// l2 norm of a complex slice.
pub fn norm2(v: &[Complex64]) -> f64 {
    norm_sqr(v).sqrt()
}
