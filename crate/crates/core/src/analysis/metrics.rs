//! Error metrics restricted to the fluid region.

use ndarray::Zip;

use crate::flow_model::arg;
use crate::{check_same_shape, BGrid, CGrid, Error, RGrid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// The ground truth image.
    True,
    /// The ensemble average reconstruction.
    Average,
}

impl Reference {
    pub fn name(self) -> &'static str {
        match self {
            Reference::True => "true",
            Reference::Average => "average",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactMap {
    pub values: RGrid,
    pub reference: Reference,
}

/// `e = 2 (b - b_s) / (|b| + |b_s|)`, with 0 where both vanish.
pub fn artifact_map(b: &RGrid, reference_grid: &RGrid, reference: Reference) -> Result<ArtifactMap> {
    check_same_shape("artifact map", reference_grid.dim(), b.dim())?;
    let values = Zip::from(b).and(reference_grid).map_collect(|&x, &s| {
        let den = x.abs() + s.abs();
        if den == 0.0 {
            0.0
        } else {
            2.0 * (x - s) / den
        }
    });
    Ok(ArtifactMap { values, reference })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MseMetrics {
    /// Relative squared error of magnitudes.
    pub mag: f64,
    /// Mean squared difference of arguments (radians squared).
    pub ang: f64,
    /// Relative squared error of the complex values.
    pub cmx: f64,
}

fn fluid_pairs<'a, T: Copy>(b: &'a ndarray::Array2<T>, s: &'a ndarray::Array2<T>, fluid: &'a BGrid) -> impl Iterator<Item = (T, T)> + 'a {
    b.iter()
        .zip(s.iter())
        .zip(fluid.iter())
        .filter_map(|((x, y), f)| f.then_some((*x, *y)))
}

fn check3(b: (usize, usize), s: (usize, usize), f: (usize, usize)) -> Result<()> {
    check_same_shape("reference", s, b)?;
    check_same_shape("fluid mask", s, f)
}

/// Magnitude, argument and complex relative MSE over the fluid region.
pub fn mse_metrics(b: &CGrid, reference: &CGrid, fluid: &BGrid) -> Result<MseMetrics> {
    check3(b.dim(), reference.dim(), fluid.dim())?;
    let (mut mag, mut ang, mut cmx, mut den, mut count) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (x, s) in fluid_pairs(b, reference, fluid) {
        mag += (x.norm() - s.norm()).powi(2);
        ang += (arg(x) - arg(s)).powi(2);
        cmx += (x - s).norm_sqr();
        den += s.norm_sqr();
        count += 1;
    }
    if count == 0 || den == 0.0 {
        return Err(Error::UndefinedMetric("reference is zero over the fluid region".into()));
    }
    Ok(MseMetrics {
        mag: mag / den,
        ang: ang / count as f64,
        cmx: cmx / den,
    })
}

/// Relative squared error of real fields (density or velocity).
pub fn mse_real(b: &RGrid, reference: &RGrid, fluid: &BGrid) -> Result<f64> {
    check3(b.dim(), reference.dim(), fluid.dim())?;
    let (mut num, mut den) = (0.0, 0.0);
    for (x, s) in fluid_pairs(b, reference, fluid) {
        num += (x - s).powi(2);
        den += s * s;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("reference is zero over the fluid region".into()));
    }
    Ok(num / den)
}

/// Median over fluid pixels of `100 |b - b_s| / |b_s|`; pixels with a zero
/// reference are skipped.
pub fn percent_error(b: &RGrid, reference: &RGrid, fluid: &BGrid) -> Result<f64> {
    check3(b.dim(), reference.dim(), fluid.dim())?;
    let mut pe: Vec<f64> = fluid_pairs(b, reference, fluid)
        .filter(|(_, s)| *s != 0.0)
        .map(|(x, s)| 100.0 * (x - s).abs() / s.abs())
        .collect();
    if pe.is_empty() {
        return Err(Error::UndefinedMetric("no fluid pixel with a nonzero reference".into()));
    }
    Ok(median(&mut pe))
}

/// Median, averaging the two central values for even lengths.
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
