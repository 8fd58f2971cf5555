//! Convex relaxation of the weight-norm problem over the PSD matrix
//! `Z = [[UUᵀ, UVᵀ], [VUᵀ, VVᵀ]]`, its solver, and dual certificates.

mod certificate;
mod solver;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::closed_form::{Method, RegularizerValue};
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::spectral::{dft, dft_real, SignalVector, Spectrum};
use crate::tolerance::ToleranceConfig;

pub use certificate::{check_dual_feasibility, hand_certificate, DualCertificate};
pub(crate) use certificate::kkt_lambda;

/// Identifies which real constraint a row of the system encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintTag {
    /// Input channel (always 0 for single-channel problems).
    pub channel: usize,
    pub freq: usize,
    /// True for the imaginary-part constraint.
    pub imag: bool,
}

/// Realified SDP in standard form `min tr Z s.t. ⟨A_i, Z⟩ = b_i, Z ⪰ 0`.
///
/// The variable is ordered `[U_0; ...; U_{R-1}; V]` with `U_r` of height `K`
/// and `V` of height `D`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub d: usize,
    pub k: usize,
    /// Number of input channels `R`.
    pub inputs: usize,
    pub constraint_matrices: Vec<DMatrix<f64>>,
    pub rhs: Vec<f64>,
    pub tags: Vec<ConstraintTag>,
    /// Target spectra, one per input channel.
    pub targets: Vec<Spectrum>,
}

impl SdpProblem {
    /// Side length `K·R + D` of the PSD variable.
    pub fn size(&self) -> usize {
        self.k * self.inputs + self.d
    }

    pub fn target_spectrum(&self) -> &Spectrum {
        &self.targets[0]
    }

    /// `⟨A_i, Z⟩` for every constraint.
    pub fn evaluate(&self, z: &DMatrix<f64>) -> Vec<f64> {
        self.constraint_matrices
            .iter()
            .map(|a| a.iter().zip(z.iter()).map(|(p, q)| p * q).sum())
            .collect()
    }

    /// Writes the sparse triplet dump.
    ///
    /// Line 1: `D K R n m`. Then for each constraint `i`: a line
    /// `constraint i rhs nnz`, followed by `nnz` lines `row col value`
    /// covering the upper triangle (0-based, row <= col).
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.size();
        writeln!(out, "{} {} {} {} {}", self.d, self.k, self.inputs, n, self.rhs.len())?;
        for (i, (a, b)) in self.constraint_matrices.iter().zip(&self.rhs).enumerate() {
            let entries: Vec<(usize, usize, f64)> = (0..n)
                .flat_map(|r| (r..n).map(move |c| (r, c)))
                .filter_map(|(r, c)| (a[(r, c)] != 0.0).then(|| (r, c, a[(r, c)])))
                .collect();
            writeln!(out, "constraint {i} {b:.17e} {}", entries.len())?;
            for (r, c, v) in entries {
                writeln!(out, "{r} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Solution of the relaxation with diagnostics and the recovered dual.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub z: DMatrix<f64>,
    /// `tr Z`.
    pub objective: f64,
    /// Dual vector in frequency form, one column per input channel.
    pub dual_lambda: Vec<Vec<Complex64>>,
    /// Raw solver multipliers, one per realified constraint.
    pub dual_y: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Primal objective minus certified dual objective.
    pub duality_gap: f64,
    pub iterations: usize,
    pub certificate: DualCertificate,
}

impl SdpSolution {
    /// Single-channel dual vector.
    pub fn lambda(&self) -> &[Complex64] {
        &self.dual_lambda[0]
    }
}

/// Independent frequencies: `0..=D/2`, with imaginary parts only where they are not forced to zero.
fn frequency_parts(d: usize) -> Vec<(usize, bool)> {
    let mut out = Vec::with_capacity(d);
    for f in 0..=d / 2 {
        out.push((f, false));
        if f != 0 && 2 * f != d {
            out.push((f, true));
        }
    }
    out
}

/// Builds the realified constraints for targets `Ŵ[:, r]`.
pub(crate) fn build_realified(targets: Vec<Spectrum>, d: usize, k: usize) -> SdpProblem {
    let r_count = targets.len();
    let n = k * r_count + d;
    let vb = k * r_count;
    let mut mats = Vec::new();
    let mut rhs = Vec::new();
    let mut tags = Vec::new();
    for (r, t) in targets.iter().enumerate() {
        for (f, imag) in frequency_parts(d) {
            let mut a = DMatrix::zeros(n, n);
            for kk in 0..k {
                for j in 0..d {
                    let ang = 2.0 * std::f64::consts::PI * ((f * (kk + j)) % d) as f64 / d as f64;
                    let v = if imag { -ang.sin() } else { ang.cos() } / d as f64;
                    a[(r * k + kk, vb + j)] = v;
                    a[(vb + j, r * k + kk)] = v;
                }
            }
            let wf = t.values()[f];
            mats.push(a);
            rhs.push(2.0 * if imag { wf.im } else { wf.re });
            tags.push(ConstraintTag { channel: r, freq: f, imag });
        }
    }
    SdpProblem { d, k, inputs: r_count, constraint_matrices: mats, rhs, tags, targets }
}

/// Builds the relaxation for target `w` and kernel size `K`.
pub fn build_sdp(w: &SignalVector, k: usize) -> Result<SdpProblem> {
    let d = w.dim();
    if k == 0 || k > d {
        return Err(Error::Dimension(format!("kernel size {k} must be in 1..={d}")));
    }
    Ok(build_realified(vec![dft(w)], d, k))
}

/// Maps solver multipliers to per-channel frequency-domain dual vectors.
pub(crate) fn lambda_from_y(p: &SdpProblem, y: &[f64]) -> Vec<Vec<Complex64>> {
    let d = p.d;
    let mut out = vec![vec![Complex64::new(0.0, 0.0); d]; p.inputs];
    for (tag, &yi) in p.tags.iter().zip(y) {
        let l = &mut out[tag.channel];
        let merged = tag.freq != 0 && 2 * tag.freq != d;
        if !merged {
            l[tag.freq].re += yi;
        } else if tag.imag {
            l[tag.freq].im += yi / 2.0;
        } else {
            l[tag.freq].re += yi / 2.0;
        }
    }
    for l in out.iter_mut() {
        for f in 1..d.div_ceil(2) {
            l[d - f] = l[f].conj();
        }
    }
    out
}

/// Dual objective `2 Σ_r Σ_d Re(conj(λ_r[d]) Ŵ[d, r])`.
pub(crate) fn dual_objective(targets: &[Spectrum], lambdas: &[Vec<Complex64>]) -> f64 {
    2.0 * targets
        .iter()
        .zip(lambdas)
        .map(|(t, l)| {
            t.values().iter().zip(l).map(|(w, x)| (x.conj() * w).re).sum::<f64>()
        })
        .sum::<f64>()
}

/// Output of a raw solve before certificate construction.
pub(crate) struct RawSolve {
    pub z: DMatrix<f64>,
    pub y: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

/// Solves with the right-hand side normalized to unit length, then rescales.
pub(crate) fn solve_raw(p: &SdpProblem, tol: &ToleranceConfig) -> Result<RawSolve> {
    let n = p.size();
    let b = DVector::from_column_slice(&p.rhs);
    let scale = b.norm();
    if scale == 0.0 {
        return Ok(RawSolve {
            z: DMatrix::zeros(n, n),
            y: vec![0.0; p.rhs.len()],
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
        });
    }
    let out = solver::solve(&p.constraint_matrices, &(b / scale), n, tol)?;
    Ok(RawSolve {
        z: out.x * scale,
        y: out.y.iter().copied().collect(),
        primal_residual: out.primal_residual * scale,
        dual_residual: out.dual_residual,
        iterations: out.iterations,
    })
}

/// Channel spectra `(Û_r columns, V̂ columns)` of a PSD factor of `Z`.
pub(crate) fn factor_spectra(
    z: &DMatrix<f64>,
    d: usize,
    k: usize,
    inputs: usize,
    rank_tol: f64,
) -> (Vec<Vec<Vec<Complex64>>>, Vec<Vec<Complex64>>) {
    let f = psd_factor(z, rank_tol);
    let vb = k * inputs;
    let mut u_hats = vec![Vec::new(); inputs];
    let mut v_hats = Vec::new();
    for c in 0..f.ncols() {
        for (r, uh) in u_hats.iter_mut().enumerate() {
            let mut u = vec![0.0; d];
            for kk in 0..k {
                u[kk] = f[(r * k + kk, c)];
            }
            uh.push(dft_real(&u));
        }
        let v: Vec<f64> = (0..d).map(|j| f[(vb + j, c)]).collect();
        v_hats.push(dft_real(&v));
    }
    (u_hats, v_hats)
}

/// Recovers a certificate from a solved problem.
///
/// Two candidates are formed, one from the solver multipliers and one from a
/// least-squares fit of the stationarity condition on the factor of `Z`. Each
/// is scaled into the feasible set and the one with the larger objective is
/// returned.
pub fn dual_certificate(p: &SdpProblem, s: &SdpSolution) -> Result<DualCertificate> {
    certify(p, &s.z, &s.dual_y, &ToleranceConfig::default())
}

pub(crate) fn certify(
    p: &SdpProblem,
    z: &DMatrix<f64>,
    y: &[f64],
    tol: &ToleranceConfig,
) -> Result<DualCertificate> {
    let from_y = lambda_from_y(p, y);
    let (u_hats, v_hats) = factor_spectra(z, p.d, p.k, p.inputs, tol.rank);
    let from_kkt = kkt_lambda(&u_hats, &v_hats, p.d);
    let mut best: Option<DualCertificate> = None;
    for cand in [from_y, from_kkt] {
        let cert = DualCertificate::new(cand, &p.targets, p.k).normalized();
        if best.as_ref().is_none_or(|b| cert.objective > b.objective) {
            best = Some(cert);
        }
    }
    let cert = best.expect("two candidates");
    cert.validate(tol.cert)?;
    Ok(cert)
}

/// Solves the relaxation and attaches a validated certificate.
pub fn solve_sdp(p: &SdpProblem, tol: &ToleranceConfig) -> Result<SdpSolution> {
    let raw = solve_raw(p, tol)?;
    let cert = certify(p, &raw.z, &raw.y, tol)?;
    let objective = raw.z.trace();
    let gap = objective - cert.objective;
    if gap.abs() > tol.gap * (1.0 + objective) {
        return Err(Error::SolverNonConvergence {
            iterations: raw.iterations,
            primal_residual: raw.primal_residual,
            dual_residual: raw.dual_residual,
            gap,
            best_objective: objective,
        });
    }
    Ok(SdpSolution {
        z: raw.z,
        objective,
        dual_lambda: cert.lambdas.clone(),
        dual_y: raw.y,
        primal_residual: raw.primal_residual,
        dual_residual: raw.dual_residual,
        duality_gap: gap,
        iterations: raw.iterations,
        certificate: cert,
    })
}

/// `R_{K,C}(w)` via build, solve and certify. Exact for every `C >= 1`.
pub fn r_sdp(w: &SignalVector, k: usize, tol: &ToleranceConfig) -> Result<RegularizerValue> {
    let p = build_sdp(w, k)?;
    if w.is_zero() {
        return Ok(RegularizerValue { value: 0.0, method: Method::Sdp, certificate: None });
    }
    let s = solve_sdp(&p, tol)?;
    Ok(RegularizerValue {
        value: s.objective,
        method: Method::Sdp,
        certificate: Some(s.certificate),
    })
}
