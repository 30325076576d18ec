use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::flow_model::{make_aorta_like, make_poiseuille, FlowField, SliceOrientation};
use crate::masks::{generate_mask, Pattern, SamplingMask};
use crate::solvers::{Method, RecoveryConfig};
use crate::transforms::{Family, WaveletBasis, DEFAULT_LEVELS};
use crate::{Error, Result};

/// Synthetic test case or a field stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataCase {
    PoiseuilleOrtho,
    PoiseuilleLong,
    AortaLike,
    File,
}

impl DataCase {
    pub const ALL: [DataCase; 4] = [DataCase::PoiseuilleOrtho, DataCase::PoiseuilleLong, DataCase::AortaLike, DataCase::File];

    pub fn name(self) -> &'static str {
        match self {
            DataCase::PoiseuilleOrtho => "poiseuille-ortho",
            DataCase::PoiseuilleLong => "poiseuille-long",
            DataCase::AortaLike => "aorta-like",
            DataCase::File => "file",
        }
    }
}

impl fmt::Display for DataCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DataCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::input(format!("unknown data case '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// One mask drawn before the run and reused by every realization.
    Fixed,
    /// A fresh mask for every realization.
    Resampled,
}

/// Flat, JSON-serialisable description of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run_id: String,
    pub data: DataCase,
    /// Field directory written by `make-data`, for `data = "file"`.
    pub data_dir: Option<PathBuf>,
    pub size: usize,
    /// Lumen radius in pixels for the Poiseuille cases; defaults to `size / 4`.
    pub radius: Option<f64>,
    pub vmax: f64,
    pub venc: f64,
    pub pattern: Pattern,
    /// Fraction of frequencies removed; 0 samples everything.
    pub ratio: f64,
    pub mask_mode: MaskMode,
    /// Draw a separate mask for each of the four images instead of sharing one.
    pub independent_masks: bool,
    /// Noise level as a percentage of the mean k-space amplitude.
    pub noise_percent: Option<f64>,
    /// Absolute noise level per real component; overrides `noise_percent`.
    pub sigma: Option<f64>,
    pub method: Method,
    pub wavelet: Family,
    pub levels: usize,
    /// Residual bound for cs/csdeb; by default the 95% radius of the noise.
    pub eta: Option<f64>,
    pub stomp_iters: usize,
    pub stomp_threshold_factor: f64,
    pub lsqr_tol: f64,
    pub lsqr_maxiter: usize,
    pub solver_tol: f64,
    pub solver_maxiter: usize,
    /// CS step size relative to `max |Phi* y|`; automatic when absent.
    pub cs_step: Option<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    /// Distances (pixels) for the correlation curves written with the run.
    pub correlation_distances: Vec<usize>,
    pub pair_count: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let r = RecoveryConfig::default();
        Self {
            run_id: "run".into(),
            data: DataCase::PoiseuilleOrtho,
            data_dir: None,
            size: 64,
            radius: None,
            vmax: 0.8,
            venc: 1.0,
            pattern: Pattern::Gaussian,
            ratio: 0.75,
            mask_mode: MaskMode::Fixed,
            independent_masks: false,
            noise_percent: Some(10.0),
            sigma: None,
            method: r.method,
            wavelet: Family::Haar,
            levels: DEFAULT_LEVELS,
            eta: None,
            stomp_iters: r.stomp_iters,
            stomp_threshold_factor: r.stomp_threshold_factor,
            lsqr_tol: r.lsqr_tol,
            lsqr_maxiter: r.lsqr_maxiter,
            solver_tol: r.solver_tol,
            solver_maxiter: r.solver_maxiter,
            cs_step: r.cs_step,
            realizations: 100,
            master_seed: 0,
            workers: 0,
            correlation_distances: (1..=8).collect(),
            pair_count: crate::analysis::DEFAULT_PAIR_COUNT,
        }
    }
}

/// Seed-path tags keeping the random streams of a run apart.
pub(crate) const TAG_MASK: u64 = 1;
pub(crate) const TAG_NOISE: u64 = 2;
pub(crate) const TAG_PAIRS: u64 = 3;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.size, self.size)
    }

    pub fn basis(&self) -> WaveletBasis {
        WaveletBasis::new(self.wavelet, self.levels)
    }

    /// Recovery settings with the residual bound for noise level `sigma` and
    /// `m` measurements.
    pub fn recovery(&self, m: usize, sigma: f64) -> Result<RecoveryConfig> {
        let eta = match self.eta {
            Some(e) => e,
            None => crate::solvers::default_eta(m, sigma)?,
        };
        Ok(RecoveryConfig {
            method: self.method,
            eta,
            stomp_iters: self.stomp_iters,
            stomp_threshold_factor: self.stomp_threshold_factor,
            lsqr_tol: self.lsqr_tol,
            lsqr_maxiter: self.lsqr_maxiter,
            solver_tol: self.solver_tol,
            solver_maxiter: self.solver_maxiter,
            cs_step: self.cs_step,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::input("realizations must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.ratio) {
            return Err(Error::input(format!("ratio must lie in [0, 1), got {}", self.ratio)));
        }
        if self.data == DataCase::File {
            match &self.data_dir {
                Some(d) if d.is_dir() => {}
                Some(d) => return Err(Error::input(format!("data directory {} does not exist", d.display()))),
                None => return Err(Error::input("data = \"file\" needs data_dir")),
            }
        } else {
            crate::kspace::check_pow2(self.shape())?;
        }
        if let Some(p) = self.noise_percent {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::input(format!("noise_percent must be >= 0, got {p}")));
            }
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::input(format!("sigma must be >= 0, got {s}")));
            }
        }
        if self.pair_count == 0 {
            return Err(Error::input("pair_count must be positive"));
        }
        self.recovery(1, 0.0)?.validate()
    }

    /// The ground-truth field described by the config.
    pub fn truth(&self) -> Result<FlowField> {
        let shape = self.shape();
        let radius = self.radius.unwrap_or(self.size as f64 / 4.0);
        let field = match self.data {
            DataCase::PoiseuilleOrtho => make_poiseuille(shape, SliceOrientation::Orthogonal, radius, self.vmax, self.venc)?,
            DataCase::PoiseuilleLong => make_poiseuille(shape, SliceOrientation::Longitudinal, radius, self.vmax, self.venc)?,
            DataCase::AortaLike => make_aorta_like(shape, self.venc)?,
            DataCase::File => {
                let dir = self.data_dir.as_ref().ok_or_else(|| Error::input("data_dir missing"))?;
                let mut f = super::store::read_field(dir)?;
                f.venc = self.venc;
                f.validate()?;
                f
            }
        };
        Ok(field)
    }

    /// Mask for realization `i` and image `k`, with the key identifying it
    /// among the run's distinct masks.
    pub fn mask_key(&self, i: usize, k: usize) -> MaskKey {
        MaskKey {
            realization: (self.mask_mode == MaskMode::Resampled).then_some(i),
            image: self.independent_masks.then_some(k),
        }
    }

    pub fn make_mask(&self, key: MaskKey, shape: (usize, usize)) -> Result<SamplingMask> {
        if self.ratio == 0.0 {
            return Ok(SamplingMask::full(shape));
        }
        let slot = |v: Option<usize>| v.map_or(u64::MAX, |x| x as u64);
        let path = [TAG_MASK, slot(key.realization), slot(key.image)];
        generate_mask(self.pattern, shape, self.ratio, crate::rng::derive_seed(self.master_seed, &path))
    }

    pub fn noise_seed(&self, i: usize, k: usize) -> u64 {
        crate::rng::derive_seed(self.master_seed, &[TAG_NOISE, i as u64, k as u64])
    }

    pub fn pair_seed(&self) -> u64 {
        crate::rng::derive_seed(self.master_seed, &[TAG_PAIRS])
    }
}

/// Identifies one of the distinct masks of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MaskKey {
    pub realization: Option<usize>,
    pub image: Option<usize>,
}

impl MaskKey {
    /// File stem, `mask_all`, `mask_k2`, `mask_r5` or `mask_r5_k2`.
    pub fn file_stem(&self) -> String {
        match (self.realization, self.image) {
            (None, None) => "mask_all".into(),
            (None, Some(k)) => format!("mask_k{k}"),
            (Some(i), None) => format!("mask_r{i}"),
            (Some(i), Some(k)) => format!("mask_r{i}_k{k}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_defaults() {
        let c = ExperimentConfig::from_json(r#"{"realizations": 4, "method": "stomp", "pattern": "bernoulli"}"#).unwrap();
        assert_eq!(c.realizations, 4);
        assert_eq!(c.method, Method::Stomp);
        assert_eq!(c.ratio, 0.75);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ExperimentConfig::from_json(r#"{"realizations": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"ratio": 1.0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"size": 48}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"data": "file"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"data": "file", "data_dir": "/nonexistent/x"}"#).is_err());
    }

    #[test]
    fn mask_keys() {
        let mut c = ExperimentConfig::default();
        assert_eq!(c.mask_key(3, 2).file_stem(), "mask_all");
        c.mask_mode = MaskMode::Resampled;
        c.independent_masks = true;
        assert_eq!(c.mask_key(3, 2).file_stem(), "mask_r3_k2");
        let a = c.make_mask(c.mask_key(0, 0), (32, 32)).unwrap();
        let b = c.make_mask(c.mask_key(0, 1), (32, 32)).unwrap();
        let a2 = c.make_mask(c.mask_key(0, 0), (32, 32)).unwrap();
        assert_ne!(a.omega, b.omega);
        assert_eq!(a, a2);
    }
}
