//! Orthonormal wavelets and the wavelet-to-k-space measurement operator.

mod operator;
mod wavelet;

pub use operator::{atom_norms, operator_adjoint, operator_apply, MeasurementOperator};
pub use wavelet::{
    wavelet_forward, wavelet_inverse, Family, FilterBank, WaveletBasis, WaveletCoeffs, DEFAULT_LEVELS,
};
