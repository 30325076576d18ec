//! Periodised orthonormal Daubechies wavelets in 2D.
//!
//! Each level filters rows and then columns of the current approximation
//! block, storing it as
//!
//! ```text
//! +----+----+
//! | LL | LH |     LL: low-pass in both directions (next level input)
//! +----+----+     LH: row detail, HL: column detail, HH: diagonal
//! | HL | HH |
//! +----+----+
//! ```
//!
//! Detail levels are numbered from the coarsest: level 1 holds the three
//! smallest detail blocks, level `levels` the three largest, and level 0 is
//! the final approximation block.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::kspace::check_pow2;
use crate::{CGrid, Error, Result, Shape};

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

// Decomposition low-pass filters as tabulated by PyWavelets.
const DB4: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

const DB8: [f64; 16] = [
    -0.00011747678412476953,
    0.0006754494064505693,
    -0.00039174037337694705,
    -0.004870352993451574,
    0.008746094047405777,
    0.013981027917398282,
    -0.044088253930794755,
    -0.017369301001807547,
    0.12874742662047847,
    0.0004724845739132828,
    -0.2840155429615469,
    -0.015829105256349306,
    0.5853546836542067,
    0.6756307362972898,
    0.31287159091429995,
    0.05441584224310401,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Haar,
    Db4,
    Db8,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Haar, Family::Db4, Family::Db8];

    pub fn name(self) -> &'static str {
        match self {
            Family::Haar => "haar",
            Family::Db4 => "db4",
            Family::Db8 => "db8",
        }
    }

    pub fn filter_len(self) -> usize {
        self.lowpass().len()
    }

    /// Scaling filter `h`, ordered for correlation: `a[k] = sum_j h[j] x[2k + j]`.
    pub fn lowpass(self) -> Vec<f64> {
        let dec: &[f64] = match self {
            Family::Haar => &HAAR,
            Family::Db4 => &DB4,
            Family::Db8 => &DB8,
        };
        dec.iter().rev().copied().collect()
    }

    /// Wavelet filter `g[j] = (-1)^j h[L-1-j]`.
    pub fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let l = h.len();
        (0..l)
            .map(|j| if j % 2 == 0 { h[l - 1 - j] } else { -h[l - 1 - j] })
            .collect()
    }

    /// Deepest decomposition before the filter is longer than the signal at
    /// the coarsest level: `floor(log2(n / (L - 1)))`, at least 1.
    pub fn max_depth(self, n: usize) -> usize {
        let l = self.filter_len() - 1;
        let mut d = 0;
        while (n >> (d + 1)) >= l && (n >> (d + 1)) > 0 {
            d += 1;
        }
        d.max(1).min(log2_floor(n))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Family::Haar),
            "db4" => Ok(Family::Db4),
            "db8" => Ok(Family::Db8),
            _ => Err(Error::input(format!("unknown wavelet family '{s}'"))),
        }
    }
}

fn log2_floor(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (usize::BITS - 1 - n.leading_zeros()) as usize
    }
}

/// Default decomposition depth when none is configured.
pub const DEFAULT_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct WaveletBasis {
    pub family: Family,
    pub levels: usize,
}

impl WaveletBasis {
    pub fn new(family: Family, levels: usize) -> Self {
        Self { family, levels }
    }

    /// Checks `1 <= levels <= log2(min(rows, cols))` and power-of-two dims.
    pub fn validate(&self, shape: Shape) -> Result<()> {
        check_pow2(shape)?;
        let max = log2_floor(shape.0.min(shape.1));
        if self.levels == 0 || self.levels > max {
            return Err(Error::input(format!(
                "{} levels invalid for a {}x{} grid (allowed 1..={max})",
                self.levels, shape.0, shape.1
            )));
        }
        Ok(())
    }

    /// Size of the detail blocks at `level` (1 = coarsest); level 0 gives
    /// the approximation block.
    pub fn block_shape(&self, shape: Shape, level: usize) -> Shape {
        let s = if level == 0 { self.levels } else { self.levels + 1 - level };
        (shape.0 >> s, shape.1 >> s)
    }

    /// Row-major linear indices of the coefficients at `level`.
    pub fn level_indices(&self, shape: Shape, level: usize) -> Result<Vec<usize>> {
        if level > self.levels {
            return Err(Error::input(format!(
                "level {level} exceeds the {} decomposition levels",
                self.levels
            )));
        }
        let (br, bc) = self.block_shape(shape, level);
        let cols = shape.1;
        let block = |r0: usize, c0: usize, out: &mut Vec<usize>| {
            for i in r0..r0 + br {
                for j in c0..c0 + bc {
                    out.push(i * cols + j);
                }
            }
        };
        let mut out = Vec::new();
        if level == 0 {
            block(0, 0, &mut out);
        } else {
            block(0, bc, &mut out);
            block(br, 0, &mut out);
            block(br, bc, &mut out);
        }
        Ok(out)
    }
}

/// Coefficient grid in the multilevel layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    pub values: CGrid,
    pub basis: WaveletBasis,
}

/// Reusable filter bank for one family.
#[derive(Debug, Clone)]
pub struct FilterBank {
    h: Vec<f64>,
    g: Vec<f64>,
}

impl FilterBank {
    pub fn new(family: Family) -> Self {
        Self {
            h: family.lowpass(),
            g: family.highpass(),
        }
    }

    /// One analysis step of a length-`n` signal into `out` (`a` then `d`).
    fn analyze(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = x.len();
        let half = n / 2;
        let l = self.h.len();
        for k in 0..half {
            let mut a = Complex64::new(0.0, 0.0);
            let mut d = Complex64::new(0.0, 0.0);
            let base = 2 * k;
            if base + l <= n {
                for j in 0..l {
                    let v = x[base + j];
                    a += v * self.h[j];
                    d += v * self.g[j];
                }
            } else {
                for j in 0..l {
                    let v = x[(base + j) % n];
                    a += v * self.h[j];
                    d += v * self.g[j];
                }
            }
            out[k] = a;
            out[half + k] = d;
        }
    }

    /// Adjoint of [`analyze`]: `y` holds `a` then `d`.
    fn synthesize(&self, y: &[Complex64], out: &mut [Complex64]) {
        let n = y.len();
        let half = n / 2;
        let l = self.h.len();
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for k in 0..half {
            let a = y[k];
            let d = y[half + k];
            let base = 2 * k;
            if base + l <= n {
                for j in 0..l {
                    out[base + j] += a * self.h[j] + d * self.g[j];
                }
            } else {
                for j in 0..l {
                    out[(base + j) % n] += a * self.h[j] + d * self.g[j];
                }
            }
        }
    }

    /// In-place forward transform of a row-major `rows x cols` buffer.
    pub fn forward_in_place(&self, data: &mut [Complex64], shape: Shape, levels: usize) {
        let (rows, cols) = shape;
        let mut buf = vec![Complex64::new(0.0, 0.0); rows.max(cols)];
        let mut out = buf.clone();
        let (mut r, mut c) = (rows, cols);
        for _ in 0..levels {
            for i in 0..r {
                let row = &mut data[i * cols..i * cols + c];
                buf[..c].copy_from_slice(row);
                self.analyze(&buf[..c], &mut out[..c]);
                row.copy_from_slice(&out[..c]);
            }
            for j in 0..c {
                for i in 0..r {
                    buf[i] = data[i * cols + j];
                }
                self.analyze(&buf[..r], &mut out[..r]);
                for i in 0..r {
                    data[i * cols + j] = out[i];
                }
            }
            r /= 2;
            c /= 2;
        }
    }

    /// In-place inverse transform.
    pub fn inverse_in_place(&self, data: &mut [Complex64], shape: Shape, levels: usize) {
        let (rows, cols) = shape;
        let mut buf = vec![Complex64::new(0.0, 0.0); rows.max(cols)];
        let mut out = buf.clone();
        for s in (0..levels).rev() {
            let (r, c) = (rows >> s, cols >> s);
            for j in 0..c {
                for i in 0..r {
                    buf[i] = data[i * cols + j];
                }
                self.synthesize(&buf[..r], &mut out[..r]);
                for i in 0..r {
                    data[i * cols + j] = out[i];
                }
            }
            for i in 0..r {
                let row = &mut data[i * cols..i * cols + c];
                buf[..c].copy_from_slice(row);
                self.synthesize(&buf[..c], &mut out[..c]);
                row.copy_from_slice(&out[..c]);
            }
        }
    }
}

pub fn wavelet_forward(image: &CGrid, basis: WaveletBasis) -> Result<WaveletCoeffs> {
    basis.validate(image.dim())?;
    let mut values = image.as_standard_layout().into_owned();
    FilterBank::new(basis.family).forward_in_place(
        values.as_slice_mut().expect("standard layout"),
        image.dim(),
        basis.levels,
    );
    Ok(WaveletCoeffs { values, basis })
}

pub fn wavelet_inverse(coeffs: &WaveletCoeffs) -> Result<CGrid> {
    let shape = coeffs.values.dim();
    coeffs.basis.validate(shape)?;
    let mut values = coeffs.values.as_standard_layout().into_owned();
    FilterBank::new(coeffs.basis.family).inverse_in_place(
        values.as_slice_mut().expect("standard layout"),
        shape,
        coeffs.basis.levels,
    );
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;
    use ndarray::Array2;

    fn random(shape: Shape, key: u64) -> CGrid {
        let p = rng::normal_pairs(key, shape.0 * shape.1);
        Array2::from_shape_vec(shape, p.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap()
    }

    fn norm(g: &CGrid) -> f64 {
        g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn filters_are_orthonormal_qmf() {
        for f in Family::ALL {
            let h = f.lowpass();
            let g = f.highpass();
            let l = h.len();
            for shift in (0..l).step_by(2) {
                let hh: f64 = (0..l - shift).map(|j| h[j] * h[j + shift]).sum();
                let gg: f64 = (0..l - shift).map(|j| g[j] * g[j + shift]).sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!((hh - want).abs() < 1e-12, "{f} h shift {shift}: {hh}");
                assert!((gg - want).abs() < 1e-12, "{f} g shift {shift}: {gg}");
            }
            for shift in (-(l as isize) + 2..l as isize).step_by(2) {
                let hg: f64 = (0..l as isize)
                    .filter(|j| (0..l as isize).contains(&(j + shift)))
                    .map(|j| h[j as usize] * g[(j + shift) as usize])
                    .sum();
                assert!(hg.abs() < 1e-12, "{f} cross shift {shift}: {hg}");
            }
            assert_relative_eq!(h.iter().sum::<f64>(), 2f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn haar_pair() {
        let bank = FilterBank::new(Family::Haar);
        let row = [Complex64::new(1.0, 0.0); 2];
        let mut out = [Complex64::new(0.0, 0.0); 2];
        bank.analyze(&row, &mut out);
        assert_relative_eq!(out[0].re, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(out[1], Complex64::new(0.0, 0.0));
    }

    /// Dense transform matrix built column by column from unit images.
    fn dense(f: Family, shape: Shape, levels: usize) -> Vec<Vec<Complex64>> {
        let n = shape.0 * shape.1;
        (0..n)
            .map(|k| {
                let mut e = Array2::zeros(shape);
                e.as_slice_mut().unwrap()[k] = Complex64::new(1.0, 0.0);
                wavelet_forward(&e, WaveletBasis::new(f, levels)).unwrap().values.iter().copied().collect()
            })
            .collect()
    }

    #[test]
    fn dense_matrix_is_orthogonal() {
        for f in Family::ALL {
            for levels in 1..=3 {
                let cols = dense(f, (8, 8), levels);
                for a in 0..64 {
                    for b in 0..64 {
                        let dot: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| (x * y.conj()).re).sum();
                        let want = if a == b { 1.0 } else { 0.0 };
                        assert!((dot - want).abs() < 1e-12, "{f} L{levels} ({a},{b}) {dot}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_image_single_coefficient() {
        for f in Family::ALL {
            let x = Array2::from_elem((16, 16), Complex64::new(1.5, -0.5));
            let c = wavelet_forward(&x, WaveletBasis::new(f, 4)).unwrap();
            for ((i, j), z) in c.values.indexed_iter() {
                if (i, j) == (0, 0) {
                    assert_relative_eq!(z.re, 1.5 * 16.0, epsilon = 1e-10);
                } else {
                    assert!(z.norm() < 1e-10, "{f} ({i},{j}) {z}");
                }
            }
        }
    }

    #[test]
    fn perfect_reconstruction_and_energy() {
        for f in Family::ALL {
            for (shape, levels) in [((8, 8), 3), ((16, 32), 2), ((64, 64), 6), ((32, 32), 1)] {
                let x = random(shape, 3);
                let c = wavelet_forward(&x, WaveletBasis::new(f, levels)).unwrap();
                assert_relative_eq!(norm(&c.values), norm(&x), max_relative = 1e-12);
                let back = wavelet_inverse(&c).unwrap();
                assert!(norm(&(&back - &x)) / norm(&x) < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_levels() {
        let x = random((8, 8), 1);
        assert!(wavelet_forward(&x, WaveletBasis::new(Family::Haar, 0)).is_err());
        assert!(wavelet_forward(&x, WaveletBasis::new(Family::Haar, 4)).is_err());
        assert!(wavelet_forward(&random((8, 6), 1), WaveletBasis::new(Family::Haar, 1)).is_err());
    }

    #[test]
    fn max_depth_matches_convention() {
        assert_eq!(Family::Haar.max_depth(64), 6);
        assert_eq!(Family::Db4.max_depth(64), 3);
        assert_eq!(Family::Db8.max_depth(64), 2);
        assert_eq!(Family::Db8.max_depth(256), 4);
        assert_eq!(Family::Db8.max_depth(8), 1);
    }

    #[test]
    fn level_indices_partition_grid() {
        let b = WaveletBasis::new(Family::Haar, 3);
        let shape = (16, 32);
        let mut all: Vec<usize> = (0..=3).flat_map(|l| b.level_indices(shape, l).unwrap()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..512).collect::<Vec<_>>());
        assert_eq!(b.level_indices(shape, 1).unwrap().len(), 3 * 2 * 4);
        assert!(b.level_indices(shape, 4).is_err());
    }

    #[test]
    fn family_parse() {
        assert_eq!("db1".parse::<Family>().unwrap(), Family::Haar);
        assert_eq!("DB8".parse::<Family>().unwrap(), Family::Db8);
        assert!("sym4".parse::<Family>().is_err());
    }
}
