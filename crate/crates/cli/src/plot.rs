//! Raster panels over the CSV outputs. The CSV written next to each image is
//! the data contract; the PNG is a quick look.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use flownoise::analysis::{artifact_map, kernel_k_omega, Reference};
use flownoise::ensemble::{average_images, load_run, StoredRun};
use flownoise::flow_model::{ComplexImageSet, FlowField};
use flownoise::gridfile::write_atomic;
use flownoise::RGrid;
use image::{Rgb, RgbImage};

use crate::commands::{correlation_curve, correlation_summary, UsageError};
use crate::Status;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum What {
    /// Density and velocities: truth, then the average reconstruction of each run.
    Recon,
    /// Artifact maps of each run's average reconstruction.
    Error,
    /// Correlation against distance for one velocity component.
    Corr,
    /// Magnitude of the sampling kernel of the first stored mask.
    Kernels,
}

const GAP: u32 = 2;
const QUANTITIES: [&str; 4] = ["rho", "v1", "v2", "v3"];

fn quantity(f: &FlowField, q: usize) -> &RGrid {
    if q == 0 {
        &f.rho
    } else {
        &f.v[q - 1]
    }
}

fn average(run: &StoredRun) -> Result<FlowField> {
    if run.realizations.is_empty() {
        return Err(UsageError(format!("run {} has no complete realizations", run.path.display())).into());
    }
    let sets: Vec<&ComplexImageSet> = run.realizations.iter().map(|(_, x)| x).collect();
    Ok(average_images(&sets, run.config.venc)?.0)
}

fn gray(v: f64, lo: f64, hi: f64) -> Rgb<u8> {
    let t = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    let g = (t * 255.0).round() as u8;
    Rgb([g, g, g])
}

/// Grid of equally sized tiles, `tiles[row][col]`, each with its own range.
fn tile_image(tiles: &[Vec<(&RGrid, f64, f64)>]) -> RgbImage {
    let (h, w) = tiles[0][0].0.dim();
    let rows = tiles.len() as u32;
    let cols = tiles.iter().map(|r| r.len()).max().unwrap_or(0) as u32;
    let mut img = RgbImage::from_pixel(cols * (w as u32 + GAP) + GAP, rows * (h as u32 + GAP) + GAP, Rgb([255, 255, 255]));
    for (r, row) in tiles.iter().enumerate() {
        for (c, (grid, lo, hi)) in row.iter().enumerate() {
            let (x0, y0) = (GAP + c as u32 * (w as u32 + GAP), GAP + r as u32 * (h as u32 + GAP));
            for ((i, j), v) in grid.indexed_iter() {
                img.put_pixel(x0 + j as u32, y0 + i as u32, gray(*v, *lo, *hi));
            }
        }
    }
    img
}

fn grid_csv(csv: &mut String, panel: &str, q: &str, g: &RGrid) {
    for ((i, j), v) in g.indexed_iter() {
        let _ = writeln!(csv, "{panel},{q},{i},{j},{v:e}");
    }
}

fn csv_path(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

fn save(img: &RgbImage, out: &Path, csv: &str) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    img.save_with_format(out, image::ImageFormat::Png)?;
    write_atomic(&csv_path(out), csv.as_bytes())?;
    println!("wrote {} and {}", out.display(), csv_path(out).display());
    Ok(())
}

fn recon_or_error(runs: &[StoredRun], what: What, out: &Path) -> Result<()> {
    let truth = &runs[0].truth;
    let shape = truth.shape();
    let venc = truth.venc;
    let mut columns: Vec<(String, FlowField)> = Vec::new();
    for run in runs {
        if run.truth.shape() != shape {
            return Err(UsageError("runs have different grid sizes".into()).into());
        }
        columns.push((run.config.run_id.clone(), average(run)?));
    }
    let rho_max = truth.rho.iter().copied().fold(0.0, f64::max);
    let mut csv = String::from("panel,quantity,row,col,value\n");
    let mut maps: Vec<Vec<RGrid>> = Vec::new();
    if what == What::Error {
        for (_, f) in &columns {
            let per_q = (0..4)
                .map(|q| Ok(artifact_map(quantity(f, q), quantity(truth, q), Reference::True)?.values))
                .collect::<Result<Vec<_>>>()?;
            maps.push(per_q);
        }
    }
    let mut tiles = Vec::new();
    for (q, name) in QUANTITIES.iter().enumerate() {
        let (lo, hi) = if q == 0 { (0.0, rho_max) } else { (-venc, venc) };
        let mut row: Vec<(&RGrid, f64, f64)> = Vec::new();
        if what == What::Recon {
            row.push((quantity(truth, q), lo, hi));
            grid_csv(&mut csv, "truth", name, quantity(truth, q));
            for (id, f) in &columns {
                row.push((quantity(f, q), lo, hi));
                grid_csv(&mut csv, id, name, quantity(f, q));
            }
        } else {
            for ((id, _), m) in columns.iter().zip(&maps) {
                row.push((&m[q], 0.0, 1.0));
                grid_csv(&mut csv, id, name, &m[q]);
            }
        }
        tiles.push(row);
    }
    save(&tile_image(&tiles), out, &csv)
}

fn draw_line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
    for s in 0..=steps {
        let x = x0 + (x1 - x0) * s / steps;
        let y = y0 + (y1 - y0) * s / steps;
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

fn corr(run: &StoredRun, component: usize, out: &Path) -> Result<()> {
    if !(1..=3).contains(&component) {
        return Err(UsageError(format!("component must be 1, 2 or 3, got {component}")).into());
    }
    let curve = correlation_curve(run, component)?;
    let summary = correlation_summary(&curve);
    let mut csv = String::from("k,distance,mean,std,pairs\n");
    for (d, m, s, n) in &summary {
        writeln!(csv, "{component},{d},{m:e},{s:e},{n}")?;
    }
    let (w, h, margin) = (480i64, 320i64, 30i64);
    let mut img = RgbImage::from_pixel(w as u32, h as u32, Rgb([255, 255, 255]));
    let dmax = run.config.correlation_distances.iter().copied().max().unwrap_or(1).max(1) as f64;
    let px = |d: f64| margin + ((d / dmax) * (w - 2 * margin) as f64).round() as i64;
    let py = |r: f64| margin + (((1.0 - r) / 2.0) * (h - 2 * margin) as f64).round() as i64;
    draw_line(&mut img, (margin, py(0.0)), (w - margin, py(0.0)), Rgb([170, 170, 170]));
    draw_line(&mut img, (margin, margin), (margin, h - margin), Rgb([0, 0, 0]));
    // Individual pair correlations as short ticks.
    for (d, samples) in curve.distances.iter().zip(&curve.samples) {
        for r in samples {
            let (x, y) = (px(*d as f64), py(*r));
            draw_line(&mut img, (x - 1, y), (x + 1, y), Rgb([90, 120, 200]));
        }
    }
    let mut prev: Option<(i64, i64)> = None;
    for (d, m, _, _) in &summary {
        let p = (px(*d as f64), py(*m));
        if let Some(q) = prev {
            draw_line(&mut img, q, p, Rgb([200, 30, 30]));
        }
        draw_line(&mut img, (p.0 - 3, p.1), (p.0 + 3, p.1), Rgb([200, 30, 30]));
        draw_line(&mut img, (p.0, p.1 - 3), (p.0, p.1 + 3), Rgb([200, 30, 30]));
        prev = Some(p);
    }
    save(&img, out, &csv)
}

fn kernels(run: &StoredRun, out: &Path) -> Result<()> {
    let Some((_, mask)) = run.masks.first() else {
        return Err(UsageError(format!("run {} has no stored masks", run.path.display())).into());
    };
    let k = kernel_k_omega(mask)?;
    let (rows, cols) = k.dim();
    // Zero displacement in the centre of the picture.
    let centred = RGrid::from_shape_fn((rows, cols), |(i, j)| k[[(i + rows / 2) % rows, (j + cols / 2) % cols]].norm());
    let mut csv = String::from("di,dj,re,im\n");
    for ((i, j), z) in k.indexed_iter() {
        let di = if i > rows / 2 { i as isize - rows as isize } else { i as isize };
        let dj = if j > cols / 2 { j as isize - cols as isize } else { j as isize };
        writeln!(csv, "{di},{dj},{:e},{:e}", z.re, z.im)?;
    }
    save(&tile_image(&[vec![(&centred, 0.0, 1.0)]]), out, &csv)
}

pub fn plot(dirs: &[PathBuf], what: What, component: usize, out: &Path) -> Result<Status> {
    let runs = dirs.iter().map(|d| load_run(d)).collect::<flownoise::Result<Vec<_>>>()?;
    match what {
        What::Recon | What::Error => recon_or_error(&runs, what, out)?,
        What::Corr => corr(&runs[0], component, out)?,
        What::Kernels => kernels(&runs[0], out)?,
    }
    Ok(Status::Done)
}
