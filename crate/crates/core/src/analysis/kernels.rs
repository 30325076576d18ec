//! Closed-form covariance kernels of least-l2 recovery.
//!
//! Kernels live on the displacement grid: entry `[i, j]` is the value at
//! displacement `(i, j)` modulo the grid size, so the zero displacement sits
//! at `[0, 0]`.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::kspace::{fft_unitary, ifft_unitary, KSpaceData, Layout};
use crate::masks::{DensityFunction, SamplingMask};
use crate::{check_same_shape, CGrid, Error, Result, Shape};

fn inverse_of_centered(values: CGrid, scale: f64) -> Result<CGrid> {
    let k = ifft_unitary(&KSpaceData { values, layout: Layout::DcCentered })?;
    Ok(k.mapv(|z| z * scale))
}

/// `K(r) = (1/m) sum_{xi in Omega} exp(2 pi i xi . r / N)`, with `K(0) = 1`.
pub fn kernel_k_omega(mask: &SamplingMask) -> Result<CGrid> {
    let m = mask.count();
    if m == 0 {
        return Err(Error::input("kernel of an empty mask"));
    }
    let (rows, cols) = mask.shape();
    let n = (rows * cols) as f64;
    let ind = mask.omega.mapv(|b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0));
    inverse_of_centered(ind, n.sqrt() / m as f64)
}

/// Kernels describing recovery from a random mask drawn from a density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityKernels {
    /// `E[x_hat] = x (*) k_mu` (circular convolution).
    pub k_mu: CGrid,
    /// Noiseless covariance `Cov(x_hat(p), x_hat(q)) = k_mu_x(p - q)`.
    pub k_mu_x: CGrid,
}

/// Kernels from the density `mu` and the true image: the inverse transforms
/// of `mu` and of `w = mu (1 - mu) |F x|^2`.
pub fn kernel_k_mu_x(density: &DensityFunction, x: &CGrid) -> Result<DensityKernels> {
    check_same_shape("density vs image", density.shape(), x.dim())?;
    let (rows, cols) = x.dim();
    let inv_sqrt_n = 1.0 / ((rows * cols) as f64).sqrt();
    let fx = fft_unitary(x)?.centered();
    let mu = density.mu.mapv(|v| Complex64::new(v, 0.0));
    let w = Zip::from(&density.mu).and(&fx).map_collect(|&m, z| Complex64::new(m * (1.0 - m) * z.norm_sqr(), 0.0));
    Ok(DensityKernels {
        k_mu: inverse_of_centered(mu, inv_sqrt_n)?,
        k_mu_x: inverse_of_centered(w, inv_sqrt_n)?,
    })
}

/// Kernel value at signed displacement `(di, dj)`.
pub fn kernel_at(kernel: &CGrid, di: isize, dj: isize) -> Complex64 {
    let (rows, cols) = kernel.dim();
    kernel[[di.rem_euclid(rows as isize) as usize, dj.rem_euclid(cols as isize) as usize]]
}

/// Entry `(p, q)` of the circulant matrix generated by `kernel`, with pixels
/// given as row-major linear indices.
pub fn circulant_entry(kernel: &CGrid, p: usize, q: usize) -> Complex64 {
    let cols = kernel.ncols();
    let (pi, pj) = ((p / cols) as isize, (p % cols) as isize);
    let (qi, qj) = ((q / cols) as isize, (q % cols) as isize);
    kernel_at(kernel, pi - qi, pj - qj)
}

/// Dense circulant matrix for small grids.
pub fn circulant_matrix(kernel: &CGrid) -> Array2<Complex64> {
    let n = kernel.len();
    Array2::from_shape_fn((n, n), |(p, q)| circulant_entry(kernel, p, q))
}

/// Accumulates a displacement-averaged (stationary) covariance estimate from
/// realizations, using `sum_r x(r + d) conj x(r) = sqrt(n) * ifft |F x|^2 (d)`.
#[derive(Debug, Clone)]
pub struct StationaryCovariance {
    shape: Shape,
    spectrum_sum: CGrid,
    power_sum: Array2<f64>,
    count: usize,
}

impl StationaryCovariance {
    pub fn new(shape: Shape) -> Self {
        Self {
            shape,
            spectrum_sum: Array2::zeros(shape),
            power_sum: Array2::zeros(shape),
            count: 0,
        }
    }

    pub fn push(&mut self, sample: &CGrid) -> Result<()> {
        check_same_shape("covariance sample", self.shape, sample.dim())?;
        let s = fft_unitary(sample)?.values;
        Zip::from(&mut self.spectrum_sum)
            .and(&mut self.power_sum)
            .and(&s)
            .for_each(|a, p, z| {
                *a += z;
                *p += z.norm_sqr();
            });
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Unbiased kernel estimate `C(d) = mean_r Cov(x(r + d), x(r))`.
    pub fn kernel(&self) -> Result<CGrid> {
        if self.count < 2 {
            return Err(Error::input("covariance needs at least two samples"));
        }
        let nn = self.count as f64;
        let n = (self.shape.0 * self.shape.1) as f64;
        let centered = Zip::from(&self.power_sum)
            .and(&self.spectrum_sum)
            .map_collect(|&p, s| Complex64::new(p - s.norm_sqr() / nn, 0.0));
        inverse_of_centered(centered, 1.0 / (n.sqrt() * (nn - 1.0)))
    }
}

/// Kernel entries ranked by magnitude, largest first, as `(index, value)`.
pub fn largest_entries(kernel: &CGrid, count: usize) -> Vec<((usize, usize), Complex64)> {
    let mut all: Vec<_> = kernel.indexed_iter().map(|(ix, &v)| (ix, v)).collect();
    all.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()));
    all.truncate(count);
    all
}
