use crate::kspace::{ifft_unitary, inject, Measurements};
use crate::masks::SamplingMask;
use crate::{Error, Result};

use super::Reconstruction;

/// Minimum-norm image consistent with the measurements: zero-fill the
/// unsampled frequencies and invert the Fourier transform.
pub fn recover_l2(meas: &Measurements, mask: &SamplingMask) -> Result<Reconstruction> {
    if meas.len() != mask.count() {
        return Err(Error::input(format!(
            "{} measurements given, the mask samples {}",
            meas.len(),
            mask.count()
        )));
    }
    let image = ifft_unitary(&inject(meas, mask)?)?;
    Ok(Reconstruction {
        image,
        coeffs: None,
        support: None,
        residual_norm: 0.0,
        iterations: 0,
        converged: true,
        history: Vec::new(),
    })
}
