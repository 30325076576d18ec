//! Tabular outputs of a run: per-realization metrics and correlation samples.

use std::io::Write;

use crate::analysis::{correlation_vs_distance, mse_metrics, mse_real, percent_error, Reference};
use crate::flow_model::{ComplexImageSet, FlowField};
use crate::{Error, RGrid, Result};

/// Row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricRow {
    pub run_id: String,
    pub realization: usize,
    /// Image index for `mse_mag`/`mse_ang`/`mse_cmx`; 0 for density metrics
    /// and the velocity component (1..=3) for velocity metrics.
    pub k: usize,
    pub metric: &'static str,
    pub reference: Reference,
    pub value: f64,
}

pub const METRICS_HEADER: &str = "run_id,realization,k,metric,reference,value";

impl MetricRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:e}",
            self.run_id,
            self.realization,
            self.k,
            self.metric,
            self.reference.name(),
            self.value
        )
    }
}

fn push_defined(rows: &mut Vec<MetricRow>, base: &MetricRow, metric: &'static str, value: Result<f64>) -> Result<()> {
    match value {
        Ok(v) => rows.push(MetricRow { metric, value: v, ..base.clone() }),
        // Zero references (e.g. in-plane velocity of through-plane flow)
        // simply have no relative error.
        Err(Error::UndefinedMetric(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Metrics of every realization against the truth and against the average.
pub fn metric_rows(
    run_id: &str,
    truth: (&FlowField, &ComplexImageSet),
    average: (&FlowField, &ComplexImageSet),
    realizations: &[(usize, &FlowField, &ComplexImageSet)],
) -> Result<Vec<MetricRow>> {
    let fluid = &truth.0.fluid_mask;
    let mut rows = Vec::new();
    for &(i, field, images) in realizations {
        for (reference, (rf, ri)) in [(Reference::True, truth), (Reference::Average, average)] {
            let base = |k: usize| MetricRow { run_id: run_id.to_string(), realization: i, k, metric: "", reference, value: 0.0 };
            for k in 0..4 {
                match mse_metrics(&images.x[k], &ri.x[k], fluid) {
                    Ok(m) => {
                        for (name, v) in [("mse_mag", m.mag), ("mse_ang", m.ang), ("mse_cmx", m.cmx)] {
                            rows.push(MetricRow { metric: name, value: v, ..base(k) });
                        }
                    }
                    Err(Error::UndefinedMetric(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            push_defined(&mut rows, &base(0), "mse_rho", mse_real(&field.rho, &rf.rho, fluid))?;
            push_defined(&mut rows, &base(0), "pe_rho", percent_error(&field.rho, &rf.rho, fluid))?;
            for c in 0..3 {
                push_defined(&mut rows, &base(c + 1), "mse_vel", mse_real(&field.v[c], &rf.v[c], fluid))?;
                push_defined(&mut rows, &base(c + 1), "pe_vel", percent_error(&field.v[c], &rf.v[c], fluid))?;
            }
        }
    }
    Ok(rows)
}

/// Row of `correlations.csv`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CorrelationRow {
    pub distance: usize,
    pub pair_index: usize,
    /// Velocity component, 1..=3.
    pub k: usize,
    pub r: f64,
}

pub const CORRELATIONS_HEADER: &str = "distance,pair_index,k,r";

impl CorrelationRow {
    pub fn csv(&self) -> String {
        format!("{},{},{},{:e}", self.distance, self.pair_index, self.k, self.r)
    }
}

/// Correlation samples of each velocity component across realizations.
/// Components that never vary (no admissible pairs) produce no rows.
pub fn correlation_rows(fields: &[&FlowField], fluid: &crate::BGrid, distances: &[usize], pair_count: usize, seed: u64) -> Result<Vec<CorrelationRow>> {
    let mut rows = Vec::new();
    for c in 0..3 {
        let stack: Vec<RGrid> = fields.iter().map(|f| f.v[c].clone()).collect();
        let curve = correlation_vs_distance(&stack, fluid, distances, pair_count, seed)?;
        for (d, samples) in curve.distances.iter().zip(&curve.samples) {
            for (j, r) in samples.iter().enumerate() {
                rows.push(CorrelationRow { distance: *d, pair_index: j, k: c + 1, r: *r });
            }
        }
    }
    Ok(rows)
}

pub(crate) fn csv_bytes<'a, I: IntoIterator<Item = String>>(header: &'a str, lines: I) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{header}").expect("vec write");
    for l in lines {
        writeln!(out, "{l}").expect("vec write");
    }
    out
}
