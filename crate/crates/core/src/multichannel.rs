//! Linear maps with `R` input channels: realizability, closed forms at `K = 1`
//! and `K = D`, and the (lower-bounding) semidefinite relaxation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::closed_form::{Method, RegularizerValue};
use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::sdp::{build_realified, solve_sdp, DualCertificate, SdpProblem, SdpSolution};
use crate::spectral::{
    dft_real, idft_complex, predictor_from_weights, predictor_spectrum, NetworkWeights,
    Spectrum,
};
use crate::tolerance::ToleranceConfig;

/// A real `D×R` matrix; column `r` is the predictor for input channel `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelMap {
    values: DMatrix<f64>,
}

impl MultiChannelMap {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidInput("map must be at least 1x1".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("map has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn d(&self) -> usize {
        self.values.nrows()
    }

    pub fn r(&self) -> usize {
        self.values.ncols()
    }

    /// Column spectra `Ŵ[:, r]`.
    pub fn spectra(&self) -> Vec<Spectrum> {
        (0..self.r())
            .map(|r| Spectrum::new(dft_real(self.values.column(r).as_slice())))
            .collect()
    }

    /// `‖Ŵ[d, :]‖₂` for each frequency.
    pub fn fourier_row_norms(&self) -> Vec<f64> {
        let s = self.spectra();
        (0..self.d())
            .map(|d| s.iter().map(|c| c.values()[d].norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }
}

/// Kernels `U_r` (each K×C) for every input channel and shared `V` (D×C).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelWeights {
    pub u: Vec<DMatrix<f64>>,
    pub v: DMatrix<f64>,
}

impl MultiChannelWeights {
    pub fn new(u: Vec<DMatrix<f64>>, v: DMatrix<f64>) -> Result<Self> {
        let first = u.first().ok_or_else(|| Error::InvalidInput("need R >= 1".into()))?;
        let (k, c) = first.shape();
        if u.iter().any(|m| m.shape() != (k, c)) {
            return Err(Error::Dimension("kernel matrices must share K and C".into()));
        }
        if v.ncols() != c || k == 0 || k > v.nrows() {
            return Err(Error::Dimension(format!(
                "U is {k}x{c} but V is {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn k(&self) -> usize {
        self.u[0].nrows()
    }

    pub fn channels(&self) -> usize {
        self.v.ncols()
    }

    /// `Σ_r ‖U_r‖² + ‖V‖²`.
    pub fn cost(&self) -> f64 {
        self.u.iter().map(|m| m.norm_squared()).sum::<f64>() + self.v.norm_squared()
    }

    fn channel(&self, r: usize) -> NetworkWeights {
        NetworkWeights { u: self.u[r].clone(), v: self.v.clone() }
    }
}

/// Column `r` is `w(U_r, V)`.
pub fn multi_predictor(p: &MultiChannelWeights) -> MultiChannelMap {
    let d = p.v.nrows();
    let mut out = DMatrix::zeros(d, p.u.len());
    for r in 0..p.u.len() {
        let w = predictor_from_weights(&p.channel(r));
        out.set_column(r, &nalgebra::DVector::from_column_slice(w.values()));
    }
    MultiChannelMap { values: out }
}

/// `Ŵ[:, r] = diag(Û_r V̂ᵀ)`.
pub fn multi_predictor_spectra(p: &MultiChannelWeights) -> Vec<Spectrum> {
    (0..p.u.len()).map(|r| predictor_spectrum(&p.channel(r))).collect()
}

/// The two known realizability conditions; the exact threshold lies between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Realizability {
    /// `K·C >= min(R, D)`.
    pub necessary_ok: bool,
    /// `C >= min(R, D)`.
    pub sufficient_ok: bool,
}

pub fn realizable(d: usize, k: usize, c: usize, r: usize) -> Realizability {
    let m = r.min(d);
    Realizability { necessary_ok: k * c >= m, sufficient_ok: c >= m }
}

/// `K = 1`: `2 √D ‖W‖_*`, valid for `C >= min(R, D)`.
pub fn r_multi_k1(w: &MultiChannelMap) -> RegularizerValue {
    let nuc: f64 = singular_values(&w.values).iter().sum();
    RegularizerValue {
        value: 2.0 * (w.d() as f64).sqrt() * nuc,
        method: Method::ClosedK1,
        certificate: None,
    }
}

/// `K = D`: `2 Σ_d ‖Ŵ[d, :]‖₂`, valid for every `C >= 1`.
pub fn r_multi_kd(w: &MultiChannelMap) -> RegularizerValue {
    RegularizerValue {
        value: 2.0 * w.fourier_row_norms().iter().sum::<f64>(),
        method: Method::ClosedKD,
        certificate: None,
    }
}

/// Relaxation over `Z` of side `K·R + D`.
#[derive(Debug, Clone)]
pub struct MultiSdpProblem {
    pub problem: SdpProblem,
}

pub fn build_multi_sdp(w: &MultiChannelMap, k: usize) -> Result<MultiSdpProblem> {
    if k == 0 || k > w.d() {
        return Err(Error::Dimension(format!("kernel size {k} must be in 1..={}", w.d())));
    }
    Ok(MultiSdpProblem { problem: build_realified(w.spectra(), w.d(), k) })
}

pub fn solve_multi_sdp(p: &MultiSdpProblem, tol: &ToleranceConfig) -> Result<SdpSolution> {
    solve_sdp(&p.problem, tol)
}

/// Relaxation value: a lower bound on the regularizer for every `C`.
pub fn r_multi_sdp(w: &MultiChannelMap, k: usize, tol: &ToleranceConfig) -> Result<RegularizerValue> {
    let p = build_multi_sdp(w, k)?;
    let s = solve_multi_sdp(&p, tol)?;
    Ok(RegularizerValue { value: s.objective, method: Method::Sdp, certificate: Some(s.certificate) })
}

/// `K = D`, `C = 1` weights with `Û_r[d] = Ŵ[d, r] / √‖Ŵ[d, :]‖` and `V̂[d] = √‖Ŵ[d, :]‖`.
pub fn kd_weight_construction(w: &MultiChannelMap) -> MultiChannelWeights {
    let d = w.d();
    let spectra = w.spectra();
    let norms = w.fourier_row_norms();
    let zero = Complex64::new(0.0, 0.0);
    let vh: Vec<Complex64> = norms.iter().map(|n| Complex64::new(n.sqrt(), 0.0)).collect();
    let to_real = |s: &[Complex64]| -> Vec<f64> { idft_complex(s).into_iter().map(|z| z.re).collect() };
    let u = spectra
        .iter()
        .map(|s| {
            let uh: Vec<Complex64> = s
                .values()
                .iter()
                .zip(&norms)
                .map(|(x, &n)| if n > 0.0 { x / n.sqrt() } else { zero })
                .collect();
            DMatrix::from_column_slice(d, 1, &to_real(&uh))
        })
        .collect();
    MultiChannelWeights { u, v: DMatrix::from_column_slice(d, 1, &to_real(&vh)) }
}

/// Dual certificate with unit Fourier rows `Ξ[d, :] = Ŵ[d, :] / ‖Ŵ[d, :]‖`.
pub fn kd_dual_certificate(w: &MultiChannelMap) -> DualCertificate {
    let spectra = w.spectra();
    let norms = w.fourier_row_norms();
    let lambdas = spectra
        .iter()
        .map(|s| {
            s.values()
                .iter()
                .zip(&norms)
                .map(|(x, &n)| if n > 0.0 { x / n } else { Complex64::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    DualCertificate::new(lambdas, &spectra, w.d())
}
