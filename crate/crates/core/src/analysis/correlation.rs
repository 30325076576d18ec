//! Pearson correlation between pixel pairs across realizations, as a function
//! of their distance.

use rand::seq::index::sample;

use crate::{check_same_shape, rng, BGrid, Error, RGrid, Result};

pub const DEFAULT_PAIR_COUNT: usize = 50;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CorrelationCurve {
    /// Distances that had at least one admissible pair.
    pub distances: Vec<usize>,
    /// One coefficient per sampled pair, aligned with `distances`.
    pub samples: Vec<Vec<f64>>,
    /// The sampled pixel pairs as `(row, col)` positions.
    pub pairs: Vec<Vec<((usize, usize), (usize, usize))>>,
    pub pair_count: usize,
    /// Requested distances without admissible pairs.
    pub omitted: Vec<usize>,
}

impl CorrelationCurve {
    /// Mean coefficient per distance.
    pub fn means(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64)
            .collect()
    }
}

/// Offsets `(di, dj)` in the upper half plane whose length is within half a
/// pixel of `d`; each unordered pair appears once.
pub fn offsets_at(d: usize) -> Vec<(isize, isize)> {
    let r = d as isize + 1;
    let mut out = Vec::new();
    for di in 0..=r {
        for dj in -r..=r {
            if di == 0 && dj <= 0 {
                continue;
            }
            let len = ((di * di + dj * dj) as f64).sqrt();
            if (len - d as f64).abs() <= 0.5 {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Pearson coefficient of two series, `None` if either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x - ma, y - mb);
        sab += u * v;
        saa += u * u;
        sbb += v * v;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Samples up to `pair_count` unordered fluid pixel pairs per distance
/// (without replacement) and computes the Pearson correlation of their values
/// across the ensemble. Pairs involving a pixel that is constant across the
/// ensemble are not admissible.
pub fn correlation_vs_distance(
    ensemble: &[RGrid],
    fluid: &BGrid,
    distances: &[usize],
    pair_count: usize,
    seed: u64,
) -> Result<CorrelationCurve> {
    if ensemble.len() < 2 {
        return Err(Error::input("correlation needs at least two realizations"));
    }
    if pair_count == 0 {
        return Err(Error::input("pair_count must be positive"));
    }
    let shape = fluid.dim();
    for g in ensemble {
        check_same_shape("ensemble member", shape, g.dim())?;
    }
    let (rows, cols) = shape;
    let series = |i: usize, j: usize| -> Vec<f64> { ensemble.iter().map(|g| g[[i, j]]).collect() };
    let varying: BGrid = ndarray::Array2::from_shape_fn(shape, |(i, j)| {
        fluid[[i, j]] && ensemble.iter().any(|g| g[[i, j]] != ensemble[0][[i, j]])
    });

    let mut curve = CorrelationCurve {
        distances: Vec::new(),
        samples: Vec::new(),
        pairs: Vec::new(),
        pair_count,
        omitted: Vec::new(),
    };
    for &d in distances {
        if d == 0 {
            return Err(Error::input("distances must be positive"));
        }
        let mut admissible = Vec::new();
        for (di, dj) in offsets_at(d) {
            for i in 0..rows {
                for j in 0..cols {
                    let (ii, jj) = (i as isize + di, j as isize + dj);
                    if ii < 0 || jj < 0 || ii >= rows as isize || jj >= cols as isize {
                        continue;
                    }
                    let (ii, jj) = (ii as usize, jj as usize);
                    if varying[[i, j]] && varying[[ii, jj]] {
                        admissible.push(((i, j), (ii, jj)));
                    }
                }
            }
        }
        if admissible.is_empty() {
            log::warn!("correlation: no admissible pair at distance {d}");
            curve.omitted.push(d);
            continue;
        }
        if admissible.len() < pair_count {
            log::warn!("correlation: only {} pairs at distance {d}", admissible.len());
        }
        let k = pair_count.min(admissible.len());
        let mut gen = rng::seeded(rng::derive_seed(seed, &[d as u64]));
        let chosen: Vec<_> = sample(&mut gen, admissible.len(), k).into_iter().map(|t| admissible[t]).collect();
        let coeffs = chosen
            .iter()
            .map(|&((i, j), (p, q))| pearson(&series(i, j), &series(p, q)).expect("admissible pixels vary"))
            .collect();
        curve.distances.push(d);
        curve.samples.push(coeffs);
        curve.pairs.push(chosen);
    }
    Ok(curve)
}
