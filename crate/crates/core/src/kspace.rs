//! Unitary 2D Fourier transforms, undersampled measurement, noise injection,
//! SNR conversions and the chi-square residual threshold.
//!
//! K-space grids are canonically stored DC-centred: row `i`, column `j` holds
//! frequency `(i - rows/2, j - cols/2)`. Measurement vectors list the sampled
//! coefficients in row-major order over that centred grid.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::masks::SamplingMask;
use crate::rng;
use crate::{check_same_shape, norm_sqr, CGrid, Error, Result, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// DC at `(rows/2, cols/2)`.
    DcCentered,
    /// DC at `(0, 0)`, the natural FFT output order.
    DcCorner,
}

/// Frequency-domain grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    pub values: CGrid,
    pub layout: Layout,
}

impl KSpaceData {
    pub fn shape(&self) -> Shape {
        self.values.dim()
    }

    /// Copy in DC-centred layout.
    pub fn centered(&self) -> CGrid {
        match self.layout {
            Layout::DcCentered => self.values.clone(),
            Layout::DcCorner => fftshift(&self.values),
        }
    }

    /// Copy in DC-corner layout.
    pub fn corner(&self) -> CGrid {
        match self.layout {
            Layout::DcCorner => self.values.clone(),
            Layout::DcCentered => ifftshift(&self.values),
        }
    }

    pub fn to_layout(&self, layout: Layout) -> KSpaceData {
        let values = match layout {
            Layout::DcCentered => self.centered(),
            Layout::DcCorner => self.corner(),
        };
        KSpaceData { values, layout }
    }
}

/// Sampled k-space coefficients, ordered row-major over the DC-centred grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub values: Vec<Complex64>,
    /// Fingerprint of the mask the values were taken with.
    pub mask_id: u64,
}

impl Measurements {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.values).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of each of the real and imaginary parts.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::input(format!("noise sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }
}

fn shift_by(a: &CGrid, dr: usize, dc: usize) -> CGrid {
    let (r, c) = a.dim();
    Array2::from_shape_fn((r, c), |(i, j)| a[[(i + r - dr) % r, (j + c - dc) % c]])
}

/// Moves DC from the corner to the centre.
pub fn fftshift(a: &CGrid) -> CGrid {
    let (r, c) = a.dim();
    shift_by(a, r / 2, c / 2)
}

/// Moves DC from the centre to the corner.
pub fn ifftshift(a: &CGrid) -> CGrid {
    let (r, c) = a.dim();
    shift_by(a, r - r / 2, c - c / 2)
}

/// Grids must have power-of-two sides for the FFT and the wavelet pyramid.
pub fn check_pow2(shape: Shape) -> Result<()> {
    let (r, c) = shape;
    if r == 0 || c == 0 || !r.is_power_of_two() || !c.is_power_of_two() {
        return Err(Error::input(format!(
            "grid dimensions must be non-zero powers of two, got {r}x{c}"
        )));
    }
    Ok(())
}

/// Planned unitary 2D FFT for one grid shape.
#[derive(Clone)]
pub struct Fft2d {
    shape: Shape,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2d").field("shape", &self.shape).finish()
    }
}

impl Fft2d {
    pub fn new(shape: Shape) -> Result<Self> {
        check_pow2(shape)?;
        let mut planner = FftPlanner::new();
        let (r, c) = shape;
        Ok(Self {
            shape,
            row_fwd: planner.plan_fft_forward(c),
            row_inv: planner.plan_fft_inverse(c),
            col_fwd: planner.plan_fft_forward(r),
            col_inv: planner.plan_fft_inverse(r),
            scale: 1.0 / ((r * c) as f64).sqrt(),
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// In-place unitary transform of a row-major buffer (DC-corner output).
    pub fn forward_slice(&self, data: &mut [Complex64]) {
        self.run(data, true);
    }

    /// In-place unitary inverse of a row-major DC-corner buffer.
    pub fn inverse_slice(&self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    fn run(&self, data: &mut [Complex64], forward: bool) {
        let (r, c) = self.shape;
        debug_assert_eq!(data.len(), r * c);
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        row.process(data);
        if r > 1 {
            let mut buf = vec![Complex64::new(0.0, 0.0); r];
            for j in 0..c {
                for i in 0..r {
                    buf[i] = data[i * c + j];
                }
                col.process(&mut buf);
                for i in 0..r {
                    data[i * c + j] = buf[i];
                }
            }
        }
        for z in data.iter_mut() {
            *z *= self.scale;
        }
    }

    pub fn forward(&self, grid: &mut CGrid) {
        let s = grid.as_slice_mut().expect("standard layout grid");
        self.forward_slice(s);
    }

    pub fn inverse(&self, grid: &mut CGrid) {
        let s = grid.as_slice_mut().expect("standard layout grid");
        self.inverse_slice(s);
    }
}

fn standard(grid: &CGrid) -> CGrid {
    if grid.is_standard_layout() {
        grid.clone()
    } else {
        grid.as_standard_layout().into_owned()
    }
}

/// Unitary forward transform; result is DC-centred.
pub fn fft_unitary(image: &CGrid) -> Result<KSpaceData> {
    let plan = Fft2d::new(image.dim())?;
    let mut v = standard(image);
    plan.forward(&mut v);
    Ok(KSpaceData {
        values: fftshift(&v),
        layout: Layout::DcCentered,
    })
}

/// Unitary inverse transform back to the image domain.
pub fn ifft_unitary(k: &KSpaceData) -> Result<CGrid> {
    let plan = Fft2d::new(k.shape())?;
    let mut v = k.corner();
    plan.inverse(&mut v);
    Ok(v)
}

/// Coefficients at the mask's sampled frequencies, in canonical order.
pub fn sample(k: &KSpaceData, mask: &SamplingMask) -> Result<Measurements> {
    check_same_shape("sampling mask vs k-space", k.shape(), mask.shape())?;
    let centred = k.centered();
    let values = centred
        .iter()
        .zip(mask.omega.iter())
        .filter_map(|(z, &keep)| keep.then_some(*z))
        .collect();
    Ok(Measurements {
        values,
        mask_id: mask.id(),
    })
}

/// Adjoint of [`sample`]: zero-filled DC-centred k-space.
pub fn inject(meas: &Measurements, mask: &SamplingMask) -> Result<KSpaceData> {
    let m = mask.count();
    if meas.len() != m {
        return Err(Error::input(format!(
            "measurement vector has {} entries but mask samples {m}",
            meas.len()
        )));
    }
    let mut values = Array2::zeros(mask.shape());
    let mut it = meas.values.iter();
    for (v, &keep) in values.iter_mut().zip(mask.omega.iter()) {
        if keep {
            *v = *it.next().expect("count checked");
        }
    }
    Ok(KSpaceData {
        values,
        layout: Layout::DcCentered,
    })
}

/// Full-grid complex noise `sigma * (g_re + i g_im)` in DC-centred layout.
///
/// The value at centred linear index `i` depends only on `(seed, i)`.
pub fn noise_grid(shape: Shape, spec: &NoiseSpec) -> CGrid {
    let pairs = rng::normal_pairs(spec.seed, shape.0 * shape.1);
    let v = pairs
        .into_iter()
        .map(|(a, b)| Complex64::new(spec.sigma * a, spec.sigma * b))
        .collect();
    Array2::from_shape_vec(shape, v).expect("shape matches length")
}

/// Adds keyed white Gaussian noise to every frequency.
pub fn add_noise(k: &KSpaceData, spec: &NoiseSpec) -> KSpaceData {
    if spec.sigma == 0.0 {
        return k.clone();
    }
    let mut noise = noise_grid(k.shape(), spec);
    if k.layout == Layout::DcCorner {
        noise = ifftshift(&noise);
    }
    KSpaceData {
        values: &k.values + &noise,
        layout: k.layout,
    }
}

/// Per-component noise level giving `SNR_x = ||x||^2 / (2 n sigma^2)`.
pub fn sigma_from_snr(x: &CGrid, snr_x: f64) -> Result<f64> {
    if !(snr_x > 0.0) {
        return Err(Error::input(format!("SNR must be positive, got {snr_x}")));
    }
    let energy: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::input("SNR is undefined for an all-zero image"));
    }
    let n = x.len() as f64;
    Ok(energy.sqrt() / (snr_x.sqrt() * (2.0 * n).sqrt()))
}

/// Mean of `|Fx|` over all frequencies.
pub fn mean_amplitude(k: &KSpaceData) -> f64 {
    k.values.iter().map(|z| z.norm()).sum::<f64>() / k.values.len() as f64
}

/// Per-component sigma for noise "at `percent`% of the average k-space
/// amplitude": the complex noise has RMS magnitude `percent/100 * mean|Fx|`,
/// i.e. each component has standard deviation `percent/100 * mean|Fx| / sqrt(2)`.
pub fn sigma_from_noise_percent(k: &KSpaceData, percent: f64) -> Result<f64> {
    if !(percent >= 0.0) || !percent.is_finite() {
        return Err(Error::input(format!("noise percent must be >= 0, got {percent}")));
    }
    Ok(percent / 100.0 * mean_amplitude(k) / std::f64::consts::SQRT_2)
}

/// `SNR_y = ||F_Omega x||^2 / (2 m sigma^2)`.
pub fn snr_measured(x: &CGrid, mask: &SamplingMask, sigma: f64) -> Result<f64> {
    let m = mask.count();
    if m == 0 {
        return Err(Error::input("measured SNR is undefined for an empty mask"));
    }
    if !(sigma > 0.0) {
        return Err(Error::input(format!("sigma must be positive, got {sigma}")));
    }
    let meas = sample(&fft_unitary(x)?, mask)?;
    Ok(norm_sqr(&meas.values) / (2.0 * m as f64 * sigma * sigma))
}

/// Radius `t(m, delta)` such that `||sigma z||_2 <= t` with probability about
/// `1 - delta` for `z` complex standard normal in `C^m`, from the normal
/// approximation of the chi distribution with `2m` degrees of freedom.
pub fn residual_threshold(m: usize, delta: f64, sigma: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("delta must lie in (0,1), got {delta}")));
    }
    if m == 0 {
        return Err(Error::input("residual threshold needs m >= 1"));
    }
    let q = normal_quantile(1.0 - delta);
    Ok(sigma * ((2.0 * m as f64 - 0.5).sqrt() + q / std::f64::consts::SQRT_2))
}

/// Standard normal quantile, Wichura's AS241 (PPND16), ~1e-16 relative.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must lie in (0,1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_7e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
