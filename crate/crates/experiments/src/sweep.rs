//! Grids of training runs over kernel sizes and channel counts.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::conv2d::{dft2d, Image};
use crate::dataset::Dataset;
use crate::train::{margin_normalize, min_margin, train, Activation, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Converged,
    /// Epoch cap reached above the target loss; normalization still applied.
    NotConverged,
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> String {
        match self {
            CellStatus::Converged => "ok".into(),
            CellStatus::NotConverged => "not_converged".into(),
            CellStatus::Failed(m) => format!("failed: {}", m.replace([',', '\n'], ";")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub kernel: (usize, usize),
    pub channels: usize,
    pub seed: u64,
    pub activation: Activation,
    pub final_loss: f64,
    /// Smallest margin before normalization.
    pub margin: f64,
    /// `‖U‖² + ‖V‖²` after margin normalization.
    pub r_hat: f64,
    pub wall_time_s: f64,
    pub status: CellStatus,
    /// Linear predictor of the normalized weights.
    pub predictor: Option<Image>,
    pub spectrum_abs: Vec<f64>,
}

impl ExperimentRecord {
    pub fn kernel_label(&self) -> String {
        match self.kernel {
            (1, k) => k.to_string(),
            (a, b) => format!("{a}x{b}"),
        }
    }

    pub fn sparsity_proxy(&self) -> Option<f64> {
        sparsity_proxy(&self.spectrum_abs)
    }
}

/// `√n ‖s‖₂ / ‖s‖₁`: 1 for a flat spectrum, `√n` for a single nonzero entry.
pub fn sparsity_proxy(s: &[f64]) -> Option<f64> {
    let l1: f64 = s.iter().map(|a| a.abs()).sum();
    if l1 == 0.0 {
        return None;
    }
    let l2 = s.iter().map(|a| a * a).sum::<f64>().sqrt();
    Some((s.len() as f64).sqrt() * l2 / l1)
}

fn run_cell(data: &Dataset, cfg: &TrainConfig) -> ExperimentRecord {
    let start = Instant::now();
    let mut rec = ExperimentRecord {
        kernel: cfg.kernel,
        channels: cfg.channels,
        seed: cfg.seed,
        activation: cfg.activation,
        final_loss: f64::NAN,
        margin: f64::NAN,
        r_hat: f64::NAN,
        wall_time_s: 0.0,
        status: CellStatus::Converged,
        predictor: None,
        spectrum_abs: Vec::new(),
    };
    let out = match train(data, cfg) {
        Ok(o) => o,
        Err(e) => {
            rec.status = CellStatus::Failed(e.to_string());
            rec.wall_time_s = start.elapsed().as_secs_f64();
            return rec;
        }
    };
    rec.final_loss = out.final_loss();
    rec.margin = min_margin(&out.weights, data, cfg.activation);
    if !out.converged {
        rec.status = CellStatus::NotConverged;
    }
    match margin_normalize(&out.weights, data, cfg.activation) {
        Ok(q) => {
            rec.r_hat = q.cost();
            let w = q.predictor();
            rec.spectrum_abs = dft2d(&w).iter().map(|z| z.norm()).collect();
            rec.predictor = Some(w);
        }
        Err(e) => rec.status = CellStatus::Failed(e.to_string()),
    }
    rec.wall_time_s = start.elapsed().as_secs_f64();
    rec
}

/// Trains every `(K, C)` cell in parallel; records come back ordered by `(K, C)`.
/// Every cell uses `cfg.seed` for initialization.
pub fn sweep(
    data: &Dataset,
    kernels: &[(usize, usize)],
    channels: &[usize],
    cfg: &TrainConfig,
) -> Vec<ExperimentRecord> {
    let mut cells: Vec<((usize, usize), usize)> =
        kernels.iter().flat_map(|&k| channels.iter().map(move |&c| (k, c))).collect();
    cells.sort();
    cells.dedup();
    cells
        .par_iter()
        .map(|&(kernel, c)| {
            let cell = TrainConfig { kernel, channels: c, ..cfg.clone() };
            run_cell(data, &cell)
        })
        .collect()
}

pub const CSV_HEADER: &str = "K,C,seed,activation,final_loss,margin,R_hat,wall_time_s,status";

pub fn to_csv(records: &[ExperimentRecord], timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let t = if timing { r.wall_time_s } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{},{},{},{:e},{:e},{:.10},{:.3},{}",
            r.kernel_label(),
            r.channels,
            r.seed,
            r.activation.as_str(),
            r.final_loss,
            r.margin,
            r.r_hat,
            t,
            r.status.label()
        );
    }
    out
}

/// Relative spread `(max - min) / min` of `R̂` over the records sharing `kernel`.
pub fn channel_spread(records: &[ExperimentRecord], kernel: (usize, usize)) -> Option<f64> {
    let vals: Vec<f64> = records
        .iter()
        .filter(|r| r.kernel == kernel && r.r_hat.is_finite())
        .map(|r| r.r_hat)
        .collect();
    if vals.is_empty() {
        return None;
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some((hi - lo) / lo)
}

/// Mean `R̂` per kernel size, in kernel order.
pub fn mean_r_hat_by_kernel(records: &[ExperimentRecord]) -> Vec<((usize, usize), f64)> {
    let mut kernels: Vec<(usize, usize)> = records.iter().map(|r| r.kernel).collect();
    kernels.dedup();
    kernels
        .into_iter()
        .filter_map(|k| {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.kernel == k && r.r_hat.is_finite())
                .map(|r| r.r_hat)
                .collect();
            (!v.is_empty()).then(|| (k, v.iter().sum::<f64>() / v.len() as f64))
        })
        .collect()
}

/// Text table with kernels as rows and channel counts as columns.
pub fn summary_table(records: &[ExperimentRecord]) -> String {
    let mut cs: Vec<usize> = records.iter().map(|r| r.channels).collect();
    cs.sort();
    cs.dedup();
    let mut out = String::from("K");
    for c in &cs {
        let _ = write!(out, "\tC={c}");
    }
    out.push_str("\tspread\n");
    let mut kernels: Vec<(usize, usize)> = records.iter().map(|r| r.kernel).collect();
    kernels.dedup();
    for k in kernels {
        let row: Vec<&ExperimentRecord> = records.iter().filter(|r| r.kernel == k).collect();
        out.push_str(&row[0].kernel_label());
        for c in &cs {
            match row.iter().find(|r| r.channels == *c) {
                Some(r) if r.r_hat.is_finite() => {
                    let _ = write!(out, "\t{:.4}", r.r_hat);
                }
                _ => out.push_str("\t-"),
            }
        }
        match channel_spread(records, k) {
            Some(s) => {
                let _ = writeln!(out, "\t{:.2}%", 100.0 * s);
            }
            None => out.push_str("\t-\n"),
        }
    }
    out
}

/// `index,w,abs_w_hat` rows of a record's normalized predictor, row-major.
pub fn predictor_csv(r: &ExperimentRecord) -> Option<String> {
    let w = r.predictor.as_ref()?;
    let mut out = String::from("row,col,w,abs_w_hat\n");
    for i in 0..w.h {
        for j in 0..w.w {
            let k = i * w.w + j;
            let _ = writeln!(out, "{i},{j},{:e},{:e}", w.data[k], r.spectrum_abs[k]);
        }
    }
    Some(out)
}
