//! Monte Carlo experiments: many noisy (and optionally re-masked)
//! reconstructions of one flow field, plus their persistence.
//!
//! Every random draw is keyed on `(master_seed, realization, image)`, so any
//! realization can be recomputed on its own and the result of a run does not
//! depend on the number of worker threads.

mod config;
mod report;
mod store;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{DataCase, ExperimentConfig, MaskKey, MaskMode};
pub use report::{correlation_rows, metric_rows, CorrelationRow, MetricRow, CORRELATIONS_HEADER, METRICS_HEADER};
pub use store::{load_run, read_field, run_to_dir, write_field, RunDir, StoredRun};

use crate::flow_model::{forward_4dflow, inverse_4dflow, ComplexImageSet, FlowField};
use crate::kspace::{add_noise, fft_unitary, sample, sigma_from_noise_percent, KSpaceData, NoiseSpec};
use crate::masks::SamplingMask;
use crate::solvers::{recover_l2, reconstruct, Method};
use crate::transforms::MeasurementOperator;
use crate::{CGrid, Error, Result};

/// One realization: four reconstructed images and the derived field.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub index: usize,
    pub images: ComplexImageSet,
    pub field: FlowField,
    /// Per image: true when the solver stopped on an iteration limit.
    pub flagged: [bool; 4],
    pub iterations: [usize; 4],
    pub residuals: [f64; 4],
    pub noise_seeds: [u64; 4],
    pub masks: [MaskKey; 4],
    pub seconds: f64,
}

impl Realization {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct WallStats {
    pub total: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub config: ExperimentConfig,
    pub truth: FlowField,
    pub truth_images: ComplexImageSet,
    /// Noise level per image.
    pub sigma: [f64; 4],
    pub masks: BTreeMap<MaskKey, SamplingMask>,
    /// Successful realizations in index order.
    pub realizations: Vec<Realization>,
    /// Realizations that raised an error, with the message.
    pub failures: Vec<(usize, String)>,
    pub wall: WallStats,
}

impl EnsembleResult {
    pub fn flagged_count(&self) -> usize {
        self.realizations.iter().filter(|r| r.any_flagged()).count()
    }
}

/// Everything a realization needs that does not depend on its index.
struct Prepared {
    spectra: Vec<KSpaceData>,
    sigma: [f64; 4],
    operators: BTreeMap<MaskKey, MeasurementOperator>,
    masks: BTreeMap<MaskKey, SamplingMask>,
}

fn prepare(config: &ExperimentConfig, truth_images: &ComplexImageSet) -> Result<Prepared> {
    let shape = truth_images.shape();
    let spectra: Vec<KSpaceData> = truth_images.x.iter().map(fft_unitary).collect::<Result<_>>()?;
    let mut sigma = [0.0; 4];
    for (k, s) in spectra.iter().enumerate() {
        sigma[k] = match (config.sigma, config.noise_percent) {
            (Some(s), _) => s,
            (None, Some(p)) => sigma_from_noise_percent(s, p)?,
            (None, None) => 0.0,
        };
    }
    let mut masks = BTreeMap::new();
    let mut operators = BTreeMap::new();
    if config.mask_mode == MaskMode::Fixed {
        for k in 0..4 {
            let key = config.mask_key(0, k);
            if !masks.contains_key(&key) {
                let mask = config.make_mask(key, shape)?;
                if config.method != Method::L2 {
                    operators.insert(key, MeasurementOperator::new(mask.clone(), config.basis())?);
                }
                masks.insert(key, mask);
            }
        }
    } else if config.method != Method::L2 {
        config.basis().validate(shape)?;
    }
    Ok(Prepared { spectra, sigma, operators, masks })
}

fn recon_one(
    config: &ExperimentConfig,
    prep: &Prepared,
    mask: &SamplingMask,
    op: Option<&MeasurementOperator>,
    k: usize,
    seed: u64,
) -> Result<(CGrid, bool, usize, f64)> {
    let noisy = add_noise(&prep.spectra[k], &NoiseSpec::new(prep.sigma[k], seed)?);
    let meas = sample(&noisy, mask)?;
    let cfg = config.recovery(meas.len(), prep.sigma[k])?;
    let rec = match op {
        Some(op) => reconstruct(&meas, op, &cfg)?,
        None => recover_l2(&meas, mask)?,
    };
    let flagged = rec.flagged();
    Ok((rec.image, flagged, rec.iterations, rec.residual_norm))
}

fn run_realization(config: &ExperimentConfig, prep: &Prepared, i: usize) -> Result<(Realization, Vec<(MaskKey, SamplingMask)>)> {
    let start = Instant::now();
    let shape = prep.spectra[0].shape();
    let mut images: Vec<CGrid> = Vec::with_capacity(4);
    let mut flagged = [false; 4];
    let mut iterations = [0; 4];
    let mut residuals = [0.0; 4];
    let mut noise_seeds = [0; 4];
    let mut keys = [config.mask_key(i, 0); 4];
    let mut fresh: Vec<(MaskKey, SamplingMask, Option<MeasurementOperator>)> = Vec::new();
    for k in 0..4 {
        let key = config.mask_key(i, k);
        keys[k] = key;
        noise_seeds[k] = config.noise_seed(i, k);
        let (mask, op) = if let Some(m) = prep.masks.get(&key) {
            (m, prep.operators.get(&key))
        } else {
            if !fresh.iter().any(|(kk, _, _)| *kk == key) {
                let mask = config.make_mask(key, shape)?;
                let op = if config.method != Method::L2 {
                    Some(MeasurementOperator::new(mask.clone(), config.basis())?)
                } else {
                    None
                };
                fresh.push((key, mask, op));
            }
            let (_, m, o) = fresh.iter().find(|(kk, _, _)| *kk == key).expect("inserted above");
            (m, o.as_ref())
        };
        let (img, flag, its, res) = recon_one(config, prep, mask, op, k, noise_seeds[k])?;
        images.push(img);
        flagged[k] = flag;
        iterations[k] = its;
        residuals[k] = res;
    }
    let images = ComplexImageSet::new(images.try_into().expect("four images"))?;
    let field = inverse_4dflow(&images, config.venc)?;
    let r = Realization {
        index: i,
        images,
        field,
        flagged,
        iterations,
        residuals,
        noise_seeds,
        masks: keys,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((r, fresh.into_iter().map(|(k, m, _)| (k, m)).collect()))
}

/// Runs the experiment; `on_done` is called from worker threads as each
/// realization finishes (for progress output and incremental persistence).
pub fn run_ensemble_with<F>(config: &ExperimentConfig, on_done: F) -> Result<EnsembleResult>
where
    F: Fn(&Realization, &[(MaskKey, SamplingMask)]) -> Result<()> + Sync,
{
    config.validate()?;
    let truth = config.truth()?;
    let truth_images = forward_4dflow(&truth)?;
    let prep = prepare(config, &truth_images)?;
    let start = Instant::now();
    let work = || {
        (0..config.realizations)
            .into_par_iter()
            .map(|i| {
                let out = run_realization(config, &prep, i).and_then(|(r, fresh)| {
                    on_done(&r, &fresh)?;
                    Ok((r, fresh))
                });
                if let Err(e) = &out {
                    log::warn!("realization {i} failed: {e}");
                }
                (i, out)
            })
            .collect::<Vec<_>>()
    };
    let outcomes = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::input(format!("thread pool: {e}")))?
            .install(work)
    } else {
        work()
    };
    let total = start.elapsed().as_secs_f64();

    let mut masks = prep.masks.clone();
    let mut realizations = Vec::new();
    let mut failures = Vec::new();
    for (i, out) in outcomes {
        match out {
            Ok((r, fresh)) => {
                masks.extend(fresh);
                realizations.push(r);
            }
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if realizations.is_empty() {
        return Err(Error::RunFailed(failures.first().map(|f| f.1.clone()).unwrap_or_default()));
    }
    let times: Vec<f64> = realizations.iter().map(|r| r.seconds).collect();
    let wall = WallStats {
        total,
        mean: times.iter().sum::<f64>() / times.len() as f64,
        max: times.iter().copied().fold(0.0, f64::max),
    };
    Ok(EnsembleResult {
        config: config.clone(),
        truth,
        truth_images,
        sigma: prep.sigma,
        masks,
        realizations,
        failures,
        wall,
    })
}

pub fn run_ensemble(config: &ExperimentConfig) -> Result<EnsembleResult> {
    run_ensemble_with(config, |_, _| Ok(()))
}

/// Elementwise mean of complex image sets and the field derived from it.
pub fn average_images(sets: &[&ComplexImageSet], venc: f64) -> Result<(FlowField, ComplexImageSet)> {
    let first = sets.first().ok_or_else(|| Error::input("nothing to average"))?;
    let mut acc = first.x.clone();
    for s in &sets[1..] {
        crate::check_same_shape("image set", first.shape(), s.shape())?;
        for (a, b) in acc.iter_mut().zip(&s.x) {
            *a += b;
        }
    }
    let scale = num_complex::Complex64::new(1.0 / sets.len() as f64, 0.0);
    for a in acc.iter_mut() {
        a.mapv_inplace(|z| z * scale);
    }
    let avg = ComplexImageSet::new(acc)?;
    Ok((inverse_4dflow(&avg, venc)?, avg))
}

/// Average reconstruction over the successful realizations.
pub fn average_reconstruction(result: &EnsembleResult) -> Result<(FlowField, ComplexImageSet)> {
    let sets: Vec<&ComplexImageSet> = result.realizations.iter().map(|r| &r.images).collect();
    average_images(&sets, result.config.venc)
}
