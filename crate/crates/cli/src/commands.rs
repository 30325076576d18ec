use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use flownoise::analysis::{correlation_vs_distance, kernel_k_mu_x, kernel_k_omega, percent_error, CorrelationCurve};
use flownoise::ensemble::{load_run, metric_rows, read_field, run_to_dir, write_field, DataCase, ExperimentConfig, StoredRun};
use flownoise::flow_model::{forward_4dflow, inverse_4dflow, make_aorta_like, make_poiseuille, ComplexImageSet, SliceOrientation};
use flownoise::gridfile::{read_bool, write_atomic, write_bool, write_complex, write_real};
use flownoise::kspace::{add_noise, fft_unitary, sample, sigma_from_noise_percent, NoiseSpec};
use flownoise::masks::{generate_mask, make_density, Pattern, SamplingMask};
use flownoise::solvers::{default_eta, reconstruct as solve, Method, RecoveryConfig};
use flownoise::transforms::{Family, MeasurementOperator, WaveletBasis};
use flownoise::{CGrid, RGrid};

use crate::Status;

/// Input rejected by the command line layer itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn make_data(case: DataCase, size: usize, venc: f64, vmax: f64, radius: Option<f64>, out: &Path) -> Result<Status> {
    let shape = (size, size);
    flownoise::kspace::check_pow2(shape)?;
    let radius = radius.unwrap_or(size as f64 / 4.0);
    let field = match case {
        DataCase::PoiseuilleOrtho => make_poiseuille(shape, SliceOrientation::Orthogonal, radius, vmax, venc),
        DataCase::PoiseuilleLong => make_poiseuille(shape, SliceOrientation::Longitudinal, radius, vmax, venc),
        DataCase::AortaLike => make_aorta_like(shape, venc),
        DataCase::File => return Err(UsageError("make-data needs a synthetic case".into()).into()),
    }
    .context("velocity encoding constraint or grid size rejected")?;
    write_field(out, &field)?;
    println!("wrote {} field {size}x{size} to {}", case, out.display());
    Ok(Status::Done)
}

/// `mask.grid` -> `mask.density.grid`.
fn density_path(out: &Path) -> std::path::PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.density.grid"))
}

pub fn make_mask(pattern: Pattern, ratio: f64, size: usize, seed: u64, out: &Path) -> Result<Status> {
    let shape = (size, size);
    let mask = if ratio == 0.0 { SamplingMask::full(shape) } else { generate_mask(pattern, shape, ratio, seed)? };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_bool(out, &mask.omega)?;
    if pattern.is_random_density() && ratio > 0.0 {
        let density = make_density(pattern, shape, ratio)?;
        write_real(&density_path(out), &density.mu)?;
    }
    println!(
        "{pattern} mask {size}x{size}: {} of {} frequencies kept ({:.4})",
        mask.count(),
        size * size,
        mask.kept_fraction()
    );
    Ok(Status::Done)
}

pub struct ReconOptions {
    pub method: Method,
    pub wavelet: Family,
    pub levels: usize,
    pub noise_pct: f64,
    pub eta: Option<f64>,
    pub seed: u64,
}

pub fn reconstruct(data: &Path, mask_path: &Path, opts: &ReconOptions, out: &Path) -> Result<Status> {
    if !(opts.noise_pct >= 0.0) {
        return Err(UsageError(format!("noise percentage must be >= 0, got {}", opts.noise_pct)).into());
    }
    let field = read_field(data).with_context(|| format!("reading field from {}", data.display()))?;
    let omega = read_bool(mask_path).with_context(|| format!("reading mask {}", mask_path.display()))?;
    let mask = SamplingMask::from_omega(omega, Pattern::Lowpass, 0.0, 0);
    let truth = forward_4dflow(&field)?;
    let op = match opts.method {
        Method::L2 => None,
        _ => Some(MeasurementOperator::new(mask.clone(), WaveletBasis::new(opts.wavelet, opts.levels))?),
    };
    // Same noise streams as realization 0 of an ensemble with this seed.
    let seeds = ExperimentConfig { master_seed: opts.seed, ..Default::default() };
    std::fs::create_dir_all(out)?;
    let mut images = Vec::with_capacity(4);
    let mut flagged = false;
    let mut status = String::from("k,sigma,eta,iterations,residual,flagged\n");
    for (k, x) in truth.x.iter().enumerate() {
        let kx = fft_unitary(x)?;
        let sigma = sigma_from_noise_percent(&kx, opts.noise_pct)?;
        let noisy = add_noise(&kx, &NoiseSpec::new(sigma, seeds.noise_seed(0, k))?);
        let meas = sample(&noisy, &mask)?;
        let eta = match opts.eta {
            Some(e) => e,
            None => default_eta(meas.len(), sigma)?,
        };
        let cfg = RecoveryConfig { method: opts.method, eta, ..Default::default() };
        let rec = match &op {
            Some(op) => solve(&meas, op, &cfg)?,
            None => flownoise::solvers::recover_l2(&meas, &mask)?,
        };
        flagged |= rec.flagged();
        writeln!(status, "{k},{sigma:e},{eta:e},{},{:e},{}", rec.iterations, rec.residual_norm, rec.flagged())?;
        write_complex(&out.join(format!("recon_{k}.grid")), &rec.image)?;
        images.push(rec.image);
    }
    let images = ComplexImageSet::new(images.try_into().expect("four images"))?;
    let recon = inverse_4dflow(&images, field.venc)?;
    write_field(&out.join("field"), &recon)?;
    write_atomic(&out.join("status.csv"), status.as_bytes())?;

    let rows = metric_rows("reconstruct", (&field, &truth), (&field, &truth), &[(0, &recon, &images)])?;
    let mut csv = String::from(flownoise::ensemble::METRICS_HEADER);
    csv.push('\n');
    for r in rows.iter().filter(|r| r.reference == flownoise::analysis::Reference::True) {
        csv.push_str(&r.csv());
        csv.push('\n');
    }
    write_atomic(&out.join("metrics.csv"), csv.as_bytes())?;

    for c in 0..3 {
        match percent_error(&recon.v[c], &field.v[c], &field.fluid_mask) {
            Ok(pe) => println!("PE(v{}) = {pe:.4}%", c + 1),
            Err(_) => println!("PE(v{}) undefined (zero reference)", c + 1),
        }
    }
    Ok(if flagged { Status::Flagged } else { Status::Done })
}

pub fn ensemble(config_path: &Path, out: &Path, workers: Option<usize>) -> Result<Status> {
    let text = std::fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(w) = workers {
        config.workers = w;
    }
    let total = config.realizations;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let result = run_to_dir(&config, out, |r| {
        let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        let flag = if r.any_flagged() { " (flagged)" } else { "" };
        eprintln!("[{n}/{total}] realization {} done in {:.2} s{flag}", r.index, r.seconds);
    })?;
    for (i, msg) in &result.failures {
        eprintln!("realization {i} failed: {msg}");
    }
    println!(
        "{}: {} realizations written to {} ({} flagged, {} failed)",
        config.run_id,
        result.realizations.len(),
        out.display(),
        result.flagged_count(),
        result.failures.len()
    );
    Ok(if result.flagged_count() > 0 { Status::Flagged } else { Status::Done })
}

fn kernel_csv(out: &mut String, name: &str, kernel: &CGrid) {
    let (rows, cols) = kernel.dim();
    for ((i, j), z) in kernel.indexed_iter() {
        let di = if i > rows / 2 { i as isize - rows as isize } else { i as isize };
        let dj = if j > cols / 2 { j as isize - cols as isize } else { j as isize };
        let _ = writeln!(out, "{name},{di},{dj},{:e},{:e}", z.re, z.im);
    }
}

fn write_kernels(run: &StoredRun) -> Result<()> {
    let Some((stem, mask)) = run.masks.first() else {
        return Err(UsageError(format!("run {} has no stored masks", run.path.display())).into());
    };
    let mut csv = String::from("kernel,di,dj,re,im\n");
    let k_omega = kernel_k_omega(mask)?;
    write_complex(&run.path.join("k_omega.grid"), &k_omega)?;
    kernel_csv(&mut csv, "k_omega", &k_omega);
    for (other, m) in run.masks.iter().skip(1) {
        write_complex(&run.path.join(format!("k_omega_{other}.grid")), &kernel_k_omega(m)?)?;
    }
    let c = &run.config;
    if c.pattern.is_random_density() && c.ratio > 0.0 {
        let density = make_density(c.pattern, run.truth.shape(), c.ratio)?;
        for (k, x) in run.truth_images.x.iter().enumerate() {
            let kernels = kernel_k_mu_x(&density, x)?;
            if k == 0 {
                write_complex(&run.path.join("k_mu.grid"), &kernels.k_mu)?;
                kernel_csv(&mut csv, "k_mu", &kernels.k_mu);
            }
            write_complex(&run.path.join(format!("k_mu_x_{k}.grid")), &kernels.k_mu_x)?;
            kernel_csv(&mut csv, &format!("k_mu_x_{k}"), &kernels.k_mu_x);
        }
    }
    write_atomic(&run.path.join("kernels.csv"), csv.as_bytes())?;
    println!("kernels from {stem}: K_omega(0) = {:.6}", k_omega[[0, 0]].re);
    Ok(())
}

/// Correlation samples of velocity component `component` (1..=3).
pub fn correlation_curve(run: &StoredRun, component: usize) -> Result<CorrelationCurve> {
    let fields = run.fields()?;
    if fields.len() < 2 {
        return Err(UsageError("correlations need at least two stored realizations".into()).into());
    }
    let stack: Vec<RGrid> = fields.iter().map(|(_, f)| f.v[component - 1].clone()).collect();
    let c = &run.config;
    Ok(correlation_vs_distance(&stack, &run.truth.fluid_mask, &c.correlation_distances, c.pair_count, c.pair_seed())?)
}

/// Mean, standard deviation and sample count per distance.
pub fn correlation_summary(curve: &CorrelationCurve) -> Vec<(usize, f64, f64, usize)> {
    curve
        .distances
        .iter()
        .zip(&curve.samples)
        .map(|(d, s)| {
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let var = if s.len() > 1 { s.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            (*d, mean, var.sqrt(), s.len())
        })
        .collect()
}

pub fn analyze(dir: &Path, correlations: bool, kernels: bool) -> Result<Status> {
    let run = load_run(dir)?;
    if run.realizations.is_empty() {
        return Err(UsageError(format!("run {} has no complete realizations", dir.display())).into());
    }
    run.write_tables()?;
    println!("{}: {} realizations, tables rewritten", run.config.run_id, run.realizations.len());
    if correlations {
        let mut csv = String::from("k,distance,mean,std,pairs\n");
        for k in 1..=3 {
            for (d, mean, std, n) in correlation_summary(&correlation_curve(&run, k)?) {
                writeln!(csv, "{k},{d},{mean:e},{std:e},{n}")?;
                println!("v{k} d={d}: mean r {mean:+.3} (sd {std:.3}, {n} pairs)");
            }
        }
        write_atomic(&dir.join("correlation_summary.csv"), csv.as_bytes())?;
    }
    if kernels {
        write_kernels(&run)?;
    }
    Ok(Status::Done)
}
