//! Implementations of the subcommands. Each returns the text printed on success.

use std::fmt::Write as _;
use std::path::Path;

use convreg_core::closed_form::{bounds, r_best, r_patterned, Method, RegularizerValue};
use convreg_core::multichannel::{r_multi_k1, r_multi_kd, r_multi_sdp, realizable};
use convreg_core::oracle::{minimize_weight_norm, minimize_weight_norm_multi, OracleConfig};
use convreg_core::rank1::extract_rank1_weights;
use convreg_core::sdp::{build_sdp, hand_certificate, solve_sdp, DualCertificate};
use convreg_core::spectral::{dft, predictor_from_weights};
use convreg_core::ToleranceConfig;
use convreg_experiments::sweep::{
    channel_spread, mean_r_hat_by_kernel, predictor_csv, sweep, summary_table, to_csv,
    ExperimentRecord,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::SweepConfig;
use crate::error::{CliError, Result};
use crate::source::{parse_matrix, parse_signal, SignalSource};
use crate::svg::{heatmap, log_line_plot};
use crate::{GlobalOpts, MethodChoice, SignalArgs};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn check_k(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(CliError::Input(format!("--k must be in 1..={d}, got {k}")));
    }
    Ok(())
}

fn no_closed_form(k: usize) -> CliError {
    CliError::Input(format!("no closed form for K = {k} and this signal; use --method sdp"))
}

fn closed_only(v: RegularizerValue, k: usize) -> Result<RegularizerValue> {
    if matches!(v.method, Method::Sdp | Method::Oracle) {
        return Err(no_closed_form(k));
    }
    Ok(v)
}

pub fn cmd_reg(
    args: &SignalArgs,
    method: MethodChoice,
    dump: Option<&Path>,
    channels: usize,
    g: &GlobalOpts,
    tol: &ToleranceConfig,
) -> Result<String> {
    let src = parse_signal(&args.w, args.d)?;
    let w = src.signal();
    let (d, k) = (w.dim(), args.k);
    check_k(k, d)?;
    if let Some(path) = dump {
        let p = build_sdp(&w, k)?;
        let mut buf = Vec::new();
        p.write_triplets(&mut buf).map_err(|e| CliError::io(path, e))?;
        write_file(path, &String::from_utf8_lossy(&buf))?;
    }
    let mut out = String::new();
    match method {
        MethodChoice::Auto => {
            let v = r_best(&w, k, tol)?;
            let _ = writeln!(out, "value: {:.10}\nmethod: {}", v.value, v.method.as_str());
            if let Some(c) = &v.certificate {
                certificate_lines(&mut out, v.value, c);
            }
        }
        MethodChoice::Closed => {
            let v = match &src {
                SignalSource::Pattern { pattern, .. } if k > 2 && k < d => {
                    closed_only(r_patterned(pattern, d, k, tol)?, k)?
                }
                _ if matches!(k, 1 | 2) || k == d => r_best(&w, k, tol)?,
                _ => return Err(no_closed_form(k)),
            };
            let _ = writeln!(out, "value: {:.10}\nmethod: {}", v.value, v.method.as_str());
        }
        MethodChoice::Sdp => {
            if w.is_zero() {
                let _ = writeln!(out, "value: {:.10}\nmethod: sdp", 0.0);
            } else {
                let s = solve_sdp(&build_sdp(&w, k)?, tol)?;
                let _ = writeln!(out, "value: {:.10}\nmethod: sdp", s.objective);
                certificate_lines(&mut out, s.objective, &s.certificate);
                let _ = writeln!(
                    out,
                    "iterations: {}\nprimal_residual: {:.3e}\ndual_residual: {:.3e}",
                    s.iterations, s.primal_residual, s.dual_residual
                );
            }
        }
        MethodChoice::Oracle => {
            let cfg = OracleConfig { channels, seed: g.seed.unwrap_or(0), ..Default::default() };
            let o = minimize_weight_norm(&w, k, &cfg)?;
            let _ = writeln!(
                out,
                "value: {:.10}\nmethod: oracle\nchannels: {channels}\nconstraint_residual: {:.3e}\nbest_restart: {}",
                o.objective, o.constraint_residual, o.restart_index
            );
        }
    }
    let b = bounds(&w, k)?;
    let _ = writeln!(
        out,
        "bounds: lower {:.10} (l1 {:.10}, scaled l2 {:.10}) upper {:.10} (l2 {:.10}, l1 {:.10})",
        b.lower(),
        b.lower_l1,
        b.lower_scaled_l2,
        b.upper(),
        b.upper_l2,
        b.upper_l1
    );
    Ok(out)
}

fn certificate_lines(out: &mut String, value: f64, c: &DualCertificate) {
    let _ = writeln!(
        out,
        "certificate_lower_bound: {:.10}\ncertificate_gap: {:.3e}\nsigma_max: {:.10}",
        c.objective,
        value - c.objective,
        c.feasibility_sigma
    );
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn cmd_rank1(args: &SignalArgs, g: &GlobalOpts, tol: &ToleranceConfig) -> Result<String> {
    let w = parse_signal(&args.w, args.d)?.signal();
    let k = args.k;
    check_k(k, w.dim())?;
    if w.is_zero() {
        return Err(CliError::Input("the zero signal has the trivial factorization U = V = 0".into()));
    }
    let s = solve_sdp(&build_sdp(&w, k)?, tol)?;
    let p = extract_rank1_weights(&s, &w, k, tol)?;
    let residual = predictor_from_weights(&p)
        .values()
        .iter()
        .zip(w.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let cost = p.cost();
    write_file(&g.out.join("u.csv"), &matrix_csv(&p.u))?;
    write_file(&g.out.join("v.csv"), &matrix_csv(&p.v))?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "sdp_value: {:.10}\nweight_cost: {:.10}\nrelative_delta: {:.3e}\npredictor_residual: {:.3e}\nwrote: {}, {}",
        s.objective,
        cost,
        (cost - s.objective) / s.objective,
        residual,
        g.out.join("u.csv").display(),
        g.out.join("v.csv").display()
    );
    Ok(out)
}

pub fn cmd_multi(
    spec: &str,
    k: usize,
    channels: Option<usize>,
    oracle: bool,
    g: &GlobalOpts,
    tol: &ToleranceConfig,
) -> Result<String> {
    let w = parse_matrix(spec)?;
    let (d, r) = (w.d(), w.r());
    check_k(k, d)?;
    let c = channels.unwrap_or(r.min(d));
    let mut out = String::new();
    let _ = writeln!(out, "D: {d}\nR: {r}\nK: {k}\nC: {c}");
    if k == 1 {
        let _ = writeln!(out, "closed_form_nuclear: {:.10}", r_multi_k1(&w).value);
    }
    if k == d {
        let _ = writeln!(out, "closed_form_group: {:.10}", r_multi_kd(&w).value);
    }
    let s = r_multi_sdp(&w, k, tol)?;
    let _ = writeln!(out, "sdp_lower_bound: {:.10}", s.value);
    if let Some(cert) = &s.certificate {
        let _ = writeln!(out, "certificate_gap: {:.3e}", s.value - cert.objective);
    }
    let re = realizable(d, k, c, r);
    let _ = writeln!(
        out,
        "realizable_necessary (K*C >= min(R,D)): {}\nrealizable_sufficient (C >= min(R,D)): {}",
        re.necessary_ok, re.sufficient_ok
    );
    if oracle {
        let cfg = OracleConfig { channels: c, seed: g.seed.unwrap_or(0), ..Default::default() };
        let o = minimize_weight_norm_multi(&w, k, &cfg)?;
        let _ = writeln!(
            out,
            "oracle_value: {:.10}\noracle_constraint_residual: {:.3e}\noracle_feasible: {}",
            o.objective,
            o.constraint_residual,
            o.feasible()
        );
    }
    Ok(out)
}

fn parse_lambda(path: &Path, d: usize) -> Result<Vec<Complex64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let lam: Vec<Complex64> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let parts: Vec<&str> = l.split(',').map(str::trim).collect();
            let parse = |s: &str| s.parse::<f64>().ok();
            match parts.as_slice() {
                [re] => parse(re).map(|re| Complex64::new(re, 0.0)),
                [re, im] => parse(re).zip(parse(im)).map(|(re, im)| Complex64::new(re, im)),
                _ => None,
            }
            .ok_or_else(|| CliError::Input(format!("malformed certificate line `{l}`")))
        })
        .collect::<Result<_>>()?;
    if lam.len() != d {
        return Err(CliError::Input(format!("certificate has {} entries, expected {d}", lam.len())));
    }
    Ok(lam)
}

pub fn cmd_certify(args: &SignalArgs, lambda: Option<&Path>, tol: &ToleranceConfig) -> Result<String> {
    let w = parse_signal(&args.w, args.d)?.signal();
    let k = args.k;
    check_k(k, w.dim())?;
    let cert = match lambda {
        Some(path) => DualCertificate::new(vec![parse_lambda(path, w.dim())?], &[dft(&w)], k),
        None => hand_certificate(&w, k),
    };
    let feasible = cert.validate(tol.cert).is_ok();
    let v = r_best(&w, k, tol)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "sigma_max: {:.10}\nfeasible: {feasible}\nlower_bound: {:.10}",
        cert.feasibility_sigma, cert.objective
    );
    let scaled = cert.normalized();
    if !feasible {
        let _ = writeln!(out, "rescaled_lower_bound: {:.10}", scaled.objective);
    }
    let _ = writeln!(
        out,
        "value: {:.10} ({})\nrelative_gap: {:.3e}",
        v.value,
        v.method.as_str(),
        if v.value > 0.0 { (v.value - scaled.objective) / v.value } else { 0.0 }
    );
    Ok(out)
}

fn cell_name(r: &ExperimentRecord) -> String {
    format!("K{}_C{}_{}", r.kernel_label(), r.channels, r.activation.as_str())
}

pub fn cmd_sweep(config: &Path, timing: bool, g: &GlobalOpts) -> Result<String> {
    let mut cfg = SweepConfig::load(config)?;
    if let Some(seed) = g.seed {
        cfg.trainer.seed = seed;
    }
    let data = cfg.dataset()?;
    let kernels = cfg.kernel_shapes(&data);
    let recs = sweep(&data, &kernels, &cfg.channels, &cfg.train_config());
    write_file(&g.out.join("sweep.csv"), &to_csv(&recs, timing))?;
    if cfg.plots {
        let cells = g.out.join("cells");
        for r in &recs {
            let (Some(w), Some(csv)) = (&r.predictor, predictor_csv(r)) else { continue };
            let name = cell_name(r);
            let title = format!("predictor K={} C={}", r.kernel_label(), r.channels);
            write_file(&cells.join(format!("{name}_predictor.svg")), &heatmap(&w.data, w.h, w.w, &title))?;
            let title = format!("|w_hat| K={} C={}", r.kernel_label(), r.channels);
            let spec = if w.h == 1 {
                log_line_plot(&r.spectrum_abs, &title)
            } else {
                heatmap(&r.spectrum_abs, w.h, w.w, &title)
            };
            write_file(&cells.join(format!("{name}_spectrum.svg")), &spec)?;
            write_file(&cells.join(format!("{name}_predictor.csv")), &csv)?;
        }
    }
    let summary = sweep_summary(&recs);
    write_file(&g.out.join("summary.txt"), &summary)?;
    Ok(summary)
}

/// R̂ table, per-kernel channel spread, monotonicity in K and the sparsity ratio.
pub fn sweep_summary(recs: &[ExperimentRecord]) -> String {
    let mut out = summary_table(recs);
    let means = mean_r_hat_by_kernel(recs);
    for (k, _) in &means {
        if let Some(s) = channel_spread(recs, *k) {
            let label = recs.iter().find(|r| r.kernel == *k).map(|r| r.kernel_label()).unwrap_or_default();
            let _ = writeln!(out, "C-spread K={label}: {:.3}%", 100.0 * s);
        }
    }
    let decreasing = means.windows(2).all(|p| p[1].1 < p[0].1);
    let _ = writeln!(out, "R_hat strictly decreasing in K: {}", if decreasing { "yes" } else { "no" });
    let c_min = recs.iter().map(|r| r.channels).min();
    let proxy = |k: (usize, usize)| {
        recs.iter().find(|r| r.kernel == k && Some(r.channels) == c_min).and_then(|r| r.sparsity_proxy())
    };
    if let (Some(first), Some(last)) = (means.first(), means.last()) {
        if let (Some(a), Some(b)) = (proxy(first.0), proxy(last.0)) {
            let _ = writeln!(out, "spectral sparsity proxy ratio (largest K / smallest K): {:.3}", b / a);
        }
    }
    let failed = recs.iter().filter(|r| !r.r_hat.is_finite()).count();
    if failed > 0 {
        let _ = writeln!(out, "failed cells: {failed}");
    }
    out
}
