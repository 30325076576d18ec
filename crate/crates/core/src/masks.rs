//! Random and deterministic k-space sampling sets.
//!
//! Ratios follow the "undersampling ratio" convention: the fraction of
//! frequencies that are *removed*. A ratio of 0.75 keeps one frequency in four.
//!
//! Variable-density patterns use the normalised radial frequency
//! `r = sqrt((fy / (rows/2))^2 + (fx / (cols/2))^2)`, so `r = 1` on the
//! Nyquist edge and `r = sqrt(2)` at the corners. Their shape parameters are
//! fixed and only the amplitude is calibrated to the requested ratio:
//!
//! | pattern     | density before clipping to 1      |
//! |-------------|-----------------------------------|
//! | gaussian    | `A exp(-r^2 / (2 * 0.15^2))`      |
//! | triangular  | `A max(0, 1 - r / sqrt(2))`       |
//! | exponential | `A exp(-r / 0.15)`                |

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::rng;
use crate::{BGrid, Error, RGrid, Result, Shape};

/// Width of the Gaussian density in units of the grid half-width.
pub const GAUSSIAN_WIDTH: f64 = 0.15;
/// Decay length of the exponential density in units of the grid half-width.
pub const EXPONENTIAL_DECAY: f64 = 0.15;
/// Radius where the triangular density reaches zero.
pub const TRIANGULAR_RADIUS: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Bernoulli,
    Gaussian,
    Triangular,
    Exponential,
    Halton,
    /// Deterministic centred low-frequency block.
    Lowpass,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Pattern::Bernoulli,
        Pattern::Gaussian,
        Pattern::Triangular,
        Pattern::Exponential,
        Pattern::Halton,
        Pattern::Lowpass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Bernoulli => "bernoulli",
            Pattern::Gaussian => "gaussian",
            Pattern::Triangular => "triangular",
            Pattern::Exponential => "exponential",
            Pattern::Halton => "halton",
            Pattern::Lowpass => "lowpass",
        }
    }

    /// True for patterns drawn from a density function.
    pub fn is_random_density(self) -> bool {
        matches!(
            self,
            Pattern::Bernoulli | Pattern::Gaussian | Pattern::Triangular | Pattern::Exponential
        )
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::input(format!("unknown mask pattern '{s}'")))
    }
}

/// Boolean sampling set, DC-centred.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    pub omega: BGrid,
    pub pattern: Pattern,
    /// Requested fraction of frequencies removed.
    pub target_ratio: f64,
    pub seed: u64,
}

impl SamplingMask {
    pub fn from_omega(omega: BGrid, pattern: Pattern, target_ratio: f64, seed: u64) -> Self {
        Self {
            omega,
            pattern,
            target_ratio,
            seed,
        }
    }

    /// Every frequency sampled.
    pub fn full(shape: Shape) -> Self {
        Self::from_omega(Array2::from_elem(shape, true), Pattern::Lowpass, 0.0, 0)
    }

    pub fn shape(&self) -> Shape {
        self.omega.dim()
    }

    /// Number of sampled frequencies `m`.
    pub fn count(&self) -> usize {
        self.omega.iter().filter(|b| **b).count()
    }

    pub fn kept_fraction(&self) -> f64 {
        self.count() as f64 / self.omega.len() as f64
    }

    /// Realised undersampling ratio `1 - m/n`.
    pub fn removed_fraction(&self) -> f64 {
        1.0 - self.kept_fraction()
    }

    /// Centred linear indices of the sampled frequencies, ascending.
    pub fn sampled_indices(&self) -> Vec<usize> {
        self.omega
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }

    /// Content fingerprint of the sampling set.
    pub fn id(&self) -> u64 {
        let (r, c) = self.shape();
        let mut h = rng::splitmix64(((r as u64) << 32) ^ c as u64);
        let mut word = 0u64;
        for (i, &b) in self.omega.iter().enumerate() {
            word |= (b as u64) << (i % 64);
            if i % 64 == 63 {
                h = rng::splitmix64(h ^ word);
                word = 0;
            }
        }
        rng::splitmix64(h ^ word)
    }
}

/// Per-frequency inclusion probabilities, DC-centred.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFunction {
    pub mu: RGrid,
    pub pattern: Pattern,
    pub target_ratio: f64,
}

impl DensityFunction {
    pub fn shape(&self) -> Shape {
        self.mu.dim()
    }

    /// Expected number of sampled frequencies.
    pub fn expected_count(&self) -> f64 {
        self.mu.sum()
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::input(format!(
            "undersampling ratio must lie in (0,1), got {ratio}"
        )));
    }
    Ok(())
}

fn check_shape(shape: Shape) -> Result<()> {
    if shape.0 == 0 || shape.1 == 0 {
        return Err(Error::input("mask shape must be non-empty"));
    }
    Ok(())
}

/// Normalised radial distance of each centred frequency from DC.
pub fn radial_frequency(shape: Shape) -> RGrid {
    let (rows, cols) = shape;
    let hr = (rows as f64 / 2.0).max(0.5);
    let hc = (cols as f64 / 2.0).max(0.5);
    Array2::from_shape_fn(shape, |(i, j)| {
        let fy = (i as f64 - (rows / 2) as f64) / hr;
        let fx = (j as f64 - (cols / 2) as f64) / hc;
        fy.hypot(fx)
    })
}

fn profile(pattern: Pattern, r: f64) -> f64 {
    match pattern {
        Pattern::Bernoulli => 1.0,
        Pattern::Gaussian => (-r * r / (2.0 * GAUSSIAN_WIDTH * GAUSSIAN_WIDTH)).exp(),
        Pattern::Triangular => (1.0 - r / TRIANGULAR_RADIUS).max(0.0),
        Pattern::Exponential => (-r / EXPONENTIAL_DECAY).exp(),
        Pattern::Halton | Pattern::Lowpass => unreachable!("not a density pattern"),
    }
}

fn clipped_sum(base: &[f64], a: f64) -> f64 {
    base.iter().map(|f| (a * f).min(1.0)).sum()
}

/// Calibrates `A` so that `sum min(1, A f) = target`.
fn calibrate(base: &[f64], target: f64) -> Result<f64> {
    let positive: Vec<f64> = base.iter().copied().filter(|f| *f > 0.0).collect();
    if positive.is_empty() || (positive.len() as f64) < target * (1.0 - 1e-12) {
        return Err(Error::Calibration(format!(
            "at most {} frequencies can be sampled, {target} requested",
            positive.len()
        )));
    }
    let total: f64 = positive.iter().sum();
    let fmin = positive.iter().copied().fold(f64::INFINITY, f64::min);
    // sum(lo) <= lo * total = target, sum(hi) = #positive >= target.
    let (mut lo, mut hi) = (target / total, 1.0 / fmin);
    if clipped_sum(&positive, lo) >= target {
        return Ok(lo);
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if clipped_sum(&positive, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let a = hi;
    let got = clipped_sum(&positive, a);
    if ((got - target) / target).abs() > 1e-9 {
        return Err(Error::Calibration(format!(
            "bisection reached sum {got}, target {target}"
        )));
    }
    Ok(a)
}

/// Inclusion probabilities for a random pattern, calibrated so that
/// `sum mu = n (1 - ratio)`.
pub fn make_density(pattern: Pattern, shape: Shape, target_ratio: f64) -> Result<DensityFunction> {
    check_ratio(target_ratio)?;
    check_shape(shape)?;
    if !pattern.is_random_density() {
        return Err(Error::input(format!("{pattern} masks have no density function")));
    }
    let n = (shape.0 * shape.1) as f64;
    let target = n * (1.0 - target_ratio);
    let mu = if pattern == Pattern::Bernoulli {
        Array2::from_elem(shape, 1.0 - target_ratio)
    } else {
        let base = radial_frequency(shape).mapv(|r| profile(pattern, r));
        let a = calibrate(base.as_slice().expect("fresh array"), target)?;
        base.mapv(|f| (a * f).min(1.0))
    };
    Ok(DensityFunction {
        mu,
        pattern,
        target_ratio,
    })
}

/// Independent Bernoulli draw per frequency with probability `mu`, keyed by
/// `(seed, centred index)`.
pub fn draw_mask(density: &DensityFunction, seed: u64) -> SamplingMask {
    let u = rng::uniforms(seed, density.mu.len());
    let omega = Array2::from_shape_vec(
        density.shape(),
        density.mu.iter().zip(u).map(|(&p, u)| u < p).collect(),
    )
    .expect("shape matches");
    SamplingMask::from_omega(omega, density.pattern, density.target_ratio, seed)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// First `round(n (1 - ratio))` distinct grid cells visited by the 2D
/// Halton sequence (bases 2 and 3), starting at a seed-dependent index.
pub fn draw_halton_mask(shape: Shape, target_ratio: f64, seed: u64) -> Result<SamplingMask> {
    check_ratio(target_ratio)?;
    check_shape(shape)?;
    let (rows, cols) = shape;
    let n = rows * cols;
    let m = ((n as f64) * (1.0 - target_ratio)).round() as usize;
    let mut omega = Array2::from_elem(shape, false);
    let mut taken = 0;
    let start = 1 + rng::splitmix64(seed) % (1 << 20);
    let budget = 64 * n as u64;
    let mut i = start;
    while taken < m && i < start + budget {
        let r = ((radical_inverse(i, 2) * rows as f64) as usize).min(rows - 1);
        let c = ((radical_inverse(i, 3) * cols as f64) as usize).min(cols - 1);
        if !omega[[r, c]] {
            omega[[r, c]] = true;
            taken += 1;
        }
        i += 1;
    }
    if taken < m {
        // Cells the sequence is slow to reach; fill from DC outwards.
        let radius = radial_frequency(shape);
        let mut rest: Vec<(usize, usize)> = omega
            .indexed_iter()
            .filter_map(|(ij, b)| (!b).then_some(ij))
            .collect();
        rest.sort_by(|a, b| radius[*a].total_cmp(&radius[*b]).then(a.cmp(b)));
        for ij in rest.into_iter().take(m - taken) {
            omega[ij] = true;
        }
    }
    Ok(SamplingMask::from_omega(omega, Pattern::Halton, target_ratio, seed))
}

fn nearest_side(len: usize, target: f64) -> usize {
    let mut best = len;
    let mut err = (len as f64 - target).abs();
    for s in (1..len).step_by(2) {
        let e = (s as f64 - target).abs();
        if e < err {
            best = s;
            err = e;
        }
    }
    best
}

/// Centred square of low frequencies keeping about `cutoff_fraction` of the
/// grid. Each side is odd, so the block is symmetric under frequency
/// negation, unless the whole axis is kept.
pub fn deterministic_lowpass_mask(shape: Shape, cutoff_fraction: f64) -> Result<SamplingMask> {
    check_shape(shape)?;
    if !(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0) {
        return Err(Error::input(format!(
            "cutoff fraction must lie in (0,1], got {cutoff_fraction}"
        )));
    }
    let (rows, cols) = shape;
    let ratio = 1.0 - cutoff_fraction;
    if cutoff_fraction == 1.0 {
        return Ok(SamplingMask::from_omega(Array2::from_elem(shape, true), Pattern::Lowpass, ratio, 0));
    }
    let sr = nearest_side(rows, cutoff_fraction.sqrt() * rows as f64);
    let sc = nearest_side(cols, cutoff_fraction.sqrt() * cols as f64);
    let inside = |i: usize, len: usize, side: usize| {
        if side == len {
            return true;
        }
        let d = (i as isize - (len / 2) as isize).unsigned_abs();
        d <= (side - 1) / 2
    };
    let omega = Array2::from_shape_fn(shape, |(i, j)| inside(i, rows, sr) && inside(j, cols, sc));
    Ok(SamplingMask::from_omega(omega, Pattern::Lowpass, ratio, 0))
}

/// Lattice disc of integer frequencies with `|xi| <= radius` around DC.
pub fn lowpass_disc_mask(shape: Shape, radius: f64) -> Result<SamplingMask> {
    check_shape(shape)?;
    if !(radius >= 0.0) {
        return Err(Error::input(format!("radius must be >= 0, got {radius}")));
    }
    let (rows, cols) = shape;
    let omega = Array2::from_shape_fn(shape, |(i, j)| {
        let fy = i as f64 - (rows / 2) as f64;
        let fx = j as f64 - (cols / 2) as f64;
        fy.hypot(fx) <= radius
    });
    let mut mask = SamplingMask::from_omega(omega, Pattern::Lowpass, 0.0, 0);
    mask.target_ratio = mask.removed_fraction();
    Ok(mask)
}

/// Dispatches to the generator for `pattern`. For `Lowpass` the kept
/// fraction is `1 - ratio` and the seed is ignored.
pub fn generate_mask(pattern: Pattern, shape: Shape, ratio: f64, seed: u64) -> Result<SamplingMask> {
    match pattern {
        Pattern::Halton => draw_halton_mask(shape, ratio, seed),
        Pattern::Lowpass => {
            check_ratio(ratio)?;
            deterministic_lowpass_mask(shape, 1.0 - ratio)
        }
        p => Ok(draw_mask(&make_density(p, shape, ratio)?, seed)),
    }
}
