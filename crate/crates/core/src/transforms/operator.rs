use num_complex::Complex64;

use super::wavelet::{FilterBank, WaveletBasis, WaveletCoeffs};
use crate::kspace::{Fft2d, Measurements};
use crate::masks::SamplingMask;
use crate::{check_same_shape, CGrid, Error, Result, Shape};

/// `Phi = S_Omega F W^-1`: wavelet coefficients to sampled k-space.
///
/// The rows of `Phi` are orthonormal (`Phi Phi* = I`) because `F` and `W`
/// are unitary and `S_Omega` selects distinct frequencies.
#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    pub mask: SamplingMask,
    pub basis: WaveletBasis,
    fft: Fft2d,
    bank: FilterBank,
    /// DC-corner linear index of each measurement, in measurement order.
    corner: Vec<usize>,
}

impl MeasurementOperator {
    pub fn new(mask: SamplingMask, basis: WaveletBasis) -> Result<Self> {
        let shape = mask.shape();
        basis.validate(shape)?;
        let (r, c) = shape;
        let corner = mask
            .sampled_indices()
            .into_iter()
            .map(|idx| {
                let (i, j) = (idx / c, idx % c);
                ((i + r - r / 2) % r) * c + (j + c - c / 2) % c
            })
            .collect();
        Ok(Self {
            fft: Fft2d::new(shape)?,
            bank: FilterBank::new(basis.family),
            mask,
            basis,
            corner,
        })
    }

    pub fn shape(&self) -> Shape {
        self.mask.shape()
    }

    /// Number of measurements.
    pub fn m(&self) -> usize {
        self.corner.len()
    }

    /// Number of coefficients.
    pub fn n(&self) -> usize {
        self.shape().0 * self.shape().1
    }

    /// Image (row-major) to measurements.
    pub fn image_to_measurements(&self, image: &[Complex64]) -> Vec<Complex64> {
        let mut buf = image.to_vec();
        self.fft.forward_slice(&mut buf);
        self.corner.iter().map(|&k| buf[k]).collect()
    }

    /// Zero-filled inverse: measurements to image (row-major).
    pub fn measurements_to_image(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n()];
        for (&k, &v) in self.corner.iter().zip(y) {
            buf[k] = v;
        }
        self.fft.inverse_slice(&mut buf);
        buf
    }

    /// Coefficients to image (row-major).
    pub fn synthesize(&self, alpha: &[Complex64]) -> Vec<Complex64> {
        let mut buf = alpha.to_vec();
        self.bank.inverse_in_place(&mut buf, self.shape(), self.basis.levels);
        buf
    }

    /// Image to coefficients.
    pub fn analyze(&self, image: &[Complex64]) -> Vec<Complex64> {
        let mut buf = image.to_vec();
        self.bank.forward_in_place(&mut buf, self.shape(), self.basis.levels);
        buf
    }

    /// `Phi alpha` on flat row-major coefficients.
    pub fn apply_slice(&self, alpha: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(alpha.len(), self.n());
        self.image_to_measurements(&self.synthesize(alpha))
    }

    /// `Phi* y`.
    pub fn adjoint_slice(&self, y: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(y.len(), self.m());
        self.analyze(&self.measurements_to_image(y))
    }

    fn grid(&self, v: Vec<Complex64>) -> CGrid {
        CGrid::from_shape_vec(self.shape(), v).expect("operator shape")
    }

    pub fn apply(&self, coeffs: &WaveletCoeffs) -> Result<Measurements> {
        check_same_shape("coefficients vs operator", self.shape(), coeffs.values.dim())?;
        if coeffs.basis != self.basis {
            return Err(Error::input("coefficient basis differs from the operator basis"));
        }
        let alpha = coeffs.values.as_standard_layout();
        Ok(Measurements {
            values: self.apply_slice(alpha.as_slice().expect("standard layout")),
            mask_id: self.mask.id(),
        })
    }

    pub fn adjoint(&self, meas: &Measurements) -> Result<WaveletCoeffs> {
        if meas.len() != self.m() {
            return Err(Error::input(format!(
                "{} measurements given, operator expects {}",
                meas.len(),
                self.m()
            )));
        }
        Ok(WaveletCoeffs {
            values: self.grid(self.adjoint_slice(&meas.values)),
            basis: self.basis,
        })
    }

    pub fn coeffs(&self, alpha: Vec<Complex64>) -> WaveletCoeffs {
        WaveletCoeffs {
            values: self.grid(alpha),
            basis: self.basis,
        }
    }

    pub fn image(&self, alpha: &[Complex64]) -> CGrid {
        self.grid(self.synthesize(alpha))
    }
}

pub fn operator_apply(op: &MeasurementOperator, coeffs: &WaveletCoeffs) -> Result<Measurements> {
    op.apply(coeffs)
}

pub fn operator_adjoint(op: &MeasurementOperator, meas: &Measurements) -> Result<WaveletCoeffs> {
    op.adjoint(meas)
}

/// `||Phi e_j||` for every coefficient `j` at `level` (1 = coarsest detail,
/// 0 = approximation), sorted in decreasing order.
pub fn atom_norms(op: &MeasurementOperator, level: usize) -> Result<Vec<f64>> {
    let idx = op.basis.level_indices(op.shape(), level)?;
    let mut e = vec![Complex64::new(0.0, 0.0); op.n()];
    let mut norms: Vec<f64> = idx
        .into_iter()
        .map(|j| {
            e[j] = Complex64::new(1.0, 0.0);
            let y = op.apply_slice(&e);
            e[j] = Complex64::new(0.0, 0.0);
            crate::norm2(&y)
        })
        .collect();
    norms.sort_by(|a, b| b.total_cmp(a));
    Ok(norms)
}
