use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::hermitian_max_eigenvalue;
use crate::spectral::{dft, SignalVector, Spectrum};

/// A dual-feasible point and the lower bound it certifies.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    /// One frequency-domain vector per input channel.
    pub lambdas: Vec<Vec<Complex64>>,
    pub objective: f64,
    /// Largest singular value of the dual constraint operator; feasible iff <= 1.
    pub feasibility_sigma: f64,
    k: usize,
    targets: Vec<Spectrum>,
}

impl DualCertificate {
    /// Evaluates `lambdas` against the targets. Single-channel objectives use
    /// `2 Σ |λ[d]| |ŵ[d]|`, which is attained by aligning phases with `ŵ`.
    pub fn new(lambdas: Vec<Vec<Complex64>>, targets: &[Spectrum], k: usize) -> Self {
        let d = targets[0].dim();
        let sigma = sigma_multi(&lambdas, d, k);
        let objective = objective_of(&lambdas, targets);
        Self { lambdas, objective, feasibility_sigma: sigma, k, targets: targets.to_vec() }
    }

    pub fn lambda(&self) -> &[Complex64] {
        &self.lambdas[0]
    }

    /// Scales into the feasible set when `σ > 1`.
    pub fn normalized(self) -> Self {
        if self.feasibility_sigma <= 1.0 || !self.feasibility_sigma.is_finite() {
            return self;
        }
        let s = 1.0 / self.feasibility_sigma;
        let lambdas = self
            .lambdas
            .iter()
            .map(|l| l.iter().map(|z| z * s).collect())
            .collect();
        Self::new(lambdas, &self.targets, self.k)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.feasibility_sigma.is_finite() && self.feasibility_sigma <= 1.0 + tol {
            Ok(())
        } else {
            Err(Error::CertificateRejected { sigma: self.feasibility_sigma, tol })
        }
    }
}

fn objective_of(lambdas: &[Vec<Complex64>], targets: &[Spectrum]) -> f64 {
    if lambdas.len() == 1 {
        2.0 * lambdas[0]
            .iter()
            .zip(targets[0].values())
            .map(|(l, w)| l.norm() * w.norm())
            .sum::<f64>()
    } else {
        super::dual_objective(targets, lambdas)
    }
}

/// `σ_max` of the stacked operator `[F_Kᵀ diag(conj λ_r) F]_r`.
pub(crate) fn sigma_multi(lambdas: &[Vec<Complex64>], d: usize, k: usize) -> f64 {
    let r_count = lambdas.len();
    let n = k * r_count;
    let tw: Vec<Complex64> = (0..d)
        .map(|j| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * j as f64 / d as f64))
        .collect();
    let mut g = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for r in 0..r_count {
        for s in 0..r_count {
            for a in 0..k {
                for b in 0..k {
                    let shift = (a + d * k - b) % d;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for f in 0..d {
                        acc += lambdas[r][f].conj() * lambdas[s][f] * tw[(f * shift) % d];
                    }
                    g[(r * k + a, s * k + b)] = acc / d as f64;
                }
            }
        }
    }
    hermitian_max_eigenvalue(&g).max(0.0).sqrt()
}

/// `σ_max(F diag(conj λ) F_K)` for a length-`D` vector and kernel size `K`.
pub fn check_dual_feasibility(lambda: &[Complex64], d: usize, k: usize) -> f64 {
    sigma_multi(&[lambda.to_vec()], d, k)
}

/// The certificate `λ = √(D/K) ŵ / ‖ŵ‖`, certifying `2√(D/K) ‖ŵ‖₂`.
pub fn hand_certificate(w: &SignalVector, k: usize) -> DualCertificate {
    let wh = dft(w);
    let d = w.dim();
    let n = wh.l2();
    let s = if n > 0.0 { (d as f64 / k as f64).sqrt() / n } else { 0.0 };
    let lambda = wh.values().iter().map(|z| z * s).collect();
    DualCertificate::new(vec![lambda], &[wh], k)
}

/// Least-squares fit of `V̂[d, c] = Σ_r λ_r[d] conj(Û_r[d, c])` per frequency.
pub(crate) fn kkt_lambda(
    u_hats: &[Vec<Vec<Complex64>>],
    v_hats: &[Vec<Complex64>],
    d: usize,
) -> Vec<Vec<Complex64>> {
    let r_count = u_hats.len();
    let cols = v_hats.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![vec![zero; d]; r_count];
    let scale: f64 = u_hats
        .iter()
        .flat_map(|u| u.iter().flat_map(|c| c.iter().map(|z| z.norm_sqr())))
        .fold(0.0, f64::max);
    for f in 0..d {
        let a = DMatrix::from_fn(cols, r_count, |c, r| u_hats[r][c][f].conj());
        let b = DMatrix::from_fn(cols, 1, |c, _| v_hats[c][f]);
        let ah = a.adjoint();
        let normal = &ah * &a;
        if normal.iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-14 * scale.max(1e-300) {
            continue;
        }
        if let Some(x) = normal.lu().solve(&(&ah * &b)) {
            for r in 0..r_count {
                if x[r].is_finite() {
                    out[r][f] = x[r];
                }
            }
        }
    }
    for l in out.iter_mut() {
        for f in 0..d {
            let g = (d - f) % d;
            if g < f {
                continue;
            }
            let avg = (l[f] + l[g].conj()) * 0.5;
            l[f] = avg;
            l[g] = avg.conj();
        }
    }
    out
}
