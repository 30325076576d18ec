//! Run-directory layout:
//!
//! ```text
//! config.json              experiment config echo
//! truth/                   ground-truth field (see write_field)
//! mask_*.grid              the distinct sampling masks
//! recon_<i>_<k>.grid       reconstructed image k of realization i
//! realizations.csv         per-image solver status and seeds
//! metrics.csv              run_id,realization,k,metric,reference,value
//! correlations.csv         distance,pair_index,k,r
//! summary.json             noise levels, failures, timing
//! ```
//!
//! Every file is written atomically, so an interrupted run leaves only
//! complete realizations behind.

use std::fs;
use std::path::{Path, PathBuf};

use super::report::{csv_bytes, correlation_rows, metric_rows, CORRELATIONS_HEADER, METRICS_HEADER};
use super::{average_images, EnsembleResult, ExperimentConfig, MaskKey, Realization};
use crate::flow_model::{forward_4dflow, inverse_4dflow, ComplexImageSet, FlowField};
use crate::gridfile::{read_bool, read_complex, read_real, write_atomic, write_bool, write_complex, write_real};
use crate::masks::SamplingMask;
use crate::{Error, Result};

const FIELD_GRIDS: [&str; 5] = ["rho", "theta0", "v1", "v2", "v3"];

#[derive(serde::Serialize, serde::Deserialize)]
struct FieldMeta {
    venc: f64,
}

/// Writes `rho`, `theta0`, `v1..v3` and `fluid_mask` grids plus `field.json`.
pub fn write_field(dir: &Path, field: &FlowField) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grids = [&field.rho, &field.theta0, &field.v[0], &field.v[1], &field.v[2]];
    for (name, g) in FIELD_GRIDS.iter().zip(grids) {
        write_real(&dir.join(format!("{name}.grid")), g)?;
    }
    write_bool(&dir.join("fluid_mask.grid"), &field.fluid_mask)?;
    write_atomic(&dir.join("field.json"), &serde_json::to_vec_pretty(&FieldMeta { venc: field.venc })?)
}

pub fn read_field(dir: &Path) -> Result<FlowField> {
    let g = |name: &str| read_real(&dir.join(format!("{name}.grid")));
    let meta: FieldMeta = serde_json::from_slice(&fs::read(dir.join("field.json"))?)?;
    let field = FlowField {
        rho: g("rho")?,
        theta0: g("theta0")?,
        v: [g("v1")?, g("v2")?, g("v3")?],
        venc: meta.venc,
        fluid_mask: read_bool(&dir.join("fluid_mask.grid"))?,
    };
    field.validate()?;
    Ok(field)
}

fn recon_path(dir: &Path, i: usize, k: usize) -> PathBuf {
    dir.join(format!("recon_{i}_{k}.grid"))
}

/// An output directory being filled by a run.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates the directory and writes the config echo and the truth.
    pub fn create(path: &Path, config: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(path)?;
        write_atomic(&path.join("config.json"), &serde_json::to_vec_pretty(config)?)?;
        write_field(&path.join("truth"), &config.truth()?)?;
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn write_mask(&self, key: MaskKey, mask: &SamplingMask) -> Result<()> {
        write_bool(&self.path.join(format!("{}.grid", key.file_stem())), &mask.omega)
    }

    pub fn write_realization(&self, r: &Realization, fresh: &[(MaskKey, SamplingMask)]) -> Result<()> {
        for (key, mask) in fresh {
            self.write_mask(*key, mask)?;
        }
        for k in 0..4 {
            write_complex(&recon_path(&self.path, r.index, k), &r.images.x[k])?;
        }
        Ok(())
    }

    /// Writes masks, status table, metrics, correlations and the summary.
    pub fn finish(&self, result: &EnsembleResult) -> Result<()> {
        for (key, mask) in &result.masks {
            self.write_mask(*key, mask)?;
        }
        let status = result.realizations.iter().flat_map(|r| {
            (0..4).map(move |k| {
                format!(
                    "{},{},{},{},{:e},{},{}",
                    r.index,
                    k,
                    r.flagged[k],
                    r.iterations[k],
                    r.residuals[k],
                    r.noise_seeds[k],
                    r.masks[k].file_stem()
                )
            })
        });
        write_atomic(
            &self.path.join("realizations.csv"),
            &csv_bytes("realization,k,flagged,iterations,residual,noise_seed,mask", status),
        )?;
        let recs: Vec<(usize, &FlowField, &ComplexImageSet)> =
            result.realizations.iter().map(|r| (r.index, &r.field, &r.images)).collect();
        write_tables(&self.path, &result.config, (&result.truth, &result.truth_images), &recs)?;
        let summary = serde_json::json!({
            "run_id": result.config.run_id,
            "realizations": result.realizations.len(),
            "flagged": result.flagged_count(),
            "failures": result.failures,
            "sigma": result.sigma,
            "wall_seconds": result.wall,
        });
        write_atomic(&self.path.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)
    }
}

/// Writes `metrics.csv` and `correlations.csv`.
pub(crate) fn write_tables(
    dir: &Path,
    config: &ExperimentConfig,
    truth: (&FlowField, &ComplexImageSet),
    recs: &[(usize, &FlowField, &ComplexImageSet)],
) -> Result<()> {
    let sets: Vec<&ComplexImageSet> = recs.iter().map(|r| r.2).collect();
    let (avg_field, avg_images) = average_images(&sets, config.venc)?;
    let metrics = metric_rows(&config.run_id, truth, (&avg_field, &avg_images), recs)?;
    write_atomic(&dir.join("metrics.csv"), &csv_bytes(METRICS_HEADER, metrics.iter().map(|m| m.csv())))?;
    let corr = if recs.len() >= 2 {
        let fields: Vec<&FlowField> = recs.iter().map(|r| r.1).collect();
        correlation_rows(&fields, &truth.0.fluid_mask, &config.correlation_distances, config.pair_count, config.pair_seed())?
    } else {
        Vec::new()
    };
    write_atomic(&dir.join("correlations.csv"), &csv_bytes(CORRELATIONS_HEADER, corr.iter().map(|c| c.csv())))
}

/// A run directory read back from disk.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub path: PathBuf,
    pub config: ExperimentConfig,
    pub truth: FlowField,
    pub truth_images: ComplexImageSet,
    /// Masks by file stem.
    pub masks: Vec<(String, SamplingMask)>,
    /// Complete realizations (all four images present), by index.
    pub realizations: Vec<(usize, ComplexImageSet)>,
}

impl StoredRun {
    /// Flow fields of the stored realizations.
    pub fn fields(&self) -> Result<Vec<(usize, FlowField)>> {
        self.realizations
            .iter()
            .map(|(i, x)| Ok((*i, inverse_4dflow(x, self.config.venc)?)))
            .collect()
    }

    /// Recomputes `metrics.csv` and `correlations.csv` from the stored images.
    pub fn write_tables(&self) -> Result<()> {
        let fields = self.fields()?;
        let recs: Vec<(usize, &FlowField, &ComplexImageSet)> =
            fields.iter().zip(&self.realizations).map(|((i, f), (_, x))| (*i, f, x)).collect();
        write_tables(&self.path, &self.config, (&self.truth, &self.truth_images), &recs)
    }
}

pub fn load_run(dir: &Path) -> Result<StoredRun> {
    if !dir.is_dir() {
        return Err(Error::input(format!("run directory {} does not exist", dir.display())));
    }
    let config: ExperimentConfig = serde_json::from_slice(&fs::read(dir.join("config.json"))?)?;
    let truth = read_field(&dir.join("truth"))?;
    let truth_images = forward_4dflow(&truth)?;
    let mut masks = Vec::new();
    let mut indices = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        let Some(stem) = name.strip_suffix(".grid") else { continue };
        if stem.starts_with("mask_") {
            let omega = read_bool(&dir.join(&name))?;
            masks.push((stem.to_string(), SamplingMask::from_omega(omega, config.pattern, config.ratio, 0)));
        } else if let Some(rest) = stem.strip_prefix("recon_") {
            if let Some((i, "0")) = rest.split_once('_') {
                if let Ok(i) = i.parse::<usize>() {
                    indices.push(i);
                }
            }
        }
    }
    masks.sort_by(|a, b| a.0.cmp(&b.0));
    indices.sort_unstable();
    let mut realizations = Vec::new();
    for i in indices {
        let paths: Vec<PathBuf> = (0..4).map(|k| recon_path(dir, i, k)).collect();
        if paths.iter().all(|p| p.is_file()) {
            let x: Vec<_> = paths.iter().map(|p| read_complex(p)).collect::<Result<_>>()?;
            realizations.push((i, ComplexImageSet::new(x.try_into().expect("four images"))?));
        }
    }
    Ok(StoredRun { path: dir.to_path_buf(), config, truth, truth_images, masks, realizations })
}

/// Runs `config` writing into `dir` as realizations complete.
pub fn run_to_dir<P>(config: &ExperimentConfig, dir: &Path, progress: P) -> Result<EnsembleResult>
where
    P: Fn(&Realization) + Sync,
{
    let run = RunDir::create(dir, config)?;
    let result = super::run_ensemble_with(config, |r, fresh| {
        run.write_realization(r, fresh)?;
        progress(r);
        Ok(())
    })?;
    run.finish(&result)?;
    Ok(result)
}
