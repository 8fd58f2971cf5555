//! Merging sums of kernel self-convolutions into a single self-convolution,
//! and extracting optimal single-channel weights from a relaxation solution.
//!
//! Self-convolutions are handled through the linear autocorrelation lags
//! `r[l] = Σ_k a[k] a[k + l]`, `0 <= l < K`. The circular value at dimension
//! `D` is `(1/√D) Σ r[l]` over lags congruent to `±d`, so matching lags implies
//! matching circular self-convolutions at every `D >= K`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::sdp::SdpSolution;
use crate::spectral::{dft, dft_real, idft_complex, Kernel, NetworkWeights, SignalVector};
use crate::tolerance::ToleranceConfig;

/// Roots of a polynomial with multiplicities, as produced by clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct RootMultiset {
    pub roots: Vec<(Complex64, usize)>,
    pub tolerance: f64,
}

/// `Σ_l u_l ⋆ u_l` for kernels of length at most `K`, stored as lags.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfConvolution {
    lags: Vec<f64>,
    d: usize,
}

fn autocorrelation(a: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|l| (0..a.len() - l).map(|k| a[k] * a[k + l]).sum())
        .collect()
}

impl SelfConvolution {
    pub fn from_kernels(kernels: &[Kernel]) -> Result<Self> {
        let first = kernels
            .first()
            .ok_or_else(|| Error::InvalidInput("at least one kernel is required".into()))?;
        let (k, d) = (first.len(), first.base_dim());
        let mut lags = vec![0.0; k];
        for u in kernels {
            if u.len() != k || u.base_dim() != d {
                return Err(Error::Dimension("kernels must share K and D".into()));
            }
            for (acc, x) in lags.iter_mut().zip(autocorrelation(u.values())) {
                *acc += x;
            }
        }
        Ok(Self { lags, d })
    }

    /// From a circular self-convolution. Needs `D >= 2K - 1` so lags do not alias.
    pub fn from_signal(q: &SignalVector, k: usize) -> Result<Self> {
        let d = q.dim();
        if k == 0 || 2 * k - 1 > d {
            return Err(Error::Unsupported(format!(
                "lags alias when D = {d} < 2K - 1 = {}; build from kernels instead",
                2 * k as isize - 1
            )));
        }
        let v = q.values();
        let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
        for i in 1..d {
            if (v[i] - v[d - i]).abs() > 1e-9 * scale {
                return Err(Error::InvalidInput(format!("not symmetric at index {i}")));
            }
            if i >= k && i <= d - k && v[i].abs() > 1e-9 * scale {
                return Err(Error::InvalidInput(format!(
                    "nonzero entry at index {i} outside the support of a length-{k} kernel"
                )));
            }
        }
        let s = (d as f64).sqrt();
        Ok(Self { lags: v[..k].iter().map(|x| x * s).collect(), d })
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    pub fn k(&self) -> usize {
        self.lags.len()
    }

    pub fn base_dim(&self) -> usize {
        self.d
    }

    /// Circular self-convolution at dimension `D`.
    pub fn values(&self) -> SignalVector {
        let d = self.d;
        let mut out = vec![0.0; d];
        for (l, &r) in self.lags.iter().enumerate() {
            out[l % d] += r;
            if l > 0 {
                out[(d - l % d) % d] += r;
            }
        }
        let s = 1.0 / (d as f64).sqrt();
        SignalVector::new(out.into_iter().map(|x| x * s).collect()).expect("finite")
    }
}

fn poly_eval(c: &[f64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + a;
    }
    (p, dp)
}

/// Roots of `Σ c[i] x^i` (nonzero leading coefficient) via the companion matrix,
/// each refined by a few guarded Newton steps.
fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let mut comp = DMatrix::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -c[i] / lead;
    }
    comp.complex_eigenvalues()
        .iter()
        .map(|&z| {
            let mut x = z;
            let mut fx = poly_eval(c, x).0.norm();
            for _ in 0..8 {
                let (p, dp) = poly_eval(c, x);
                if dp.norm() == 0.0 {
                    break;
                }
                let nx = x - p / dp;
                let nf = poly_eval(c, nx).0.norm();
                if nf.is_finite() && nf < fx {
                    x = nx;
                    fx = nf;
                } else {
                    break;
                }
            }
            x
        })
        .collect()
}

/// Picks one root from each inversion pair and half of every unit-circle cluster.
fn select_roots(roots: &[Complex64], tol: f64) -> Result<(Vec<Complex64>, RootMultiset)> {
    let fail = |reason: String| Error::RootPairing { tol, reason, roots: roots.to_vec() };
    let (unit, off): (Vec<Complex64>, Vec<Complex64>) =
        roots.iter().partition(|z| z.norm().ln().abs() <= tol);
    let inside: Vec<Complex64> = off.iter().copied().filter(|z| z.norm() < 1.0).collect();
    if 2 * inside.len() != off.len() {
        return Err(fail(format!(
            "{} roots inside the unit circle but {} outside",
            inside.len(),
            off.len() - inside.len()
        )));
    }
    let mut selected = inside;
    let mut clusters: Vec<(Complex64, usize)> = off.iter().map(|&z| (z, 1)).collect();

    // Unit-circle roots have even multiplicity: sort by angle starting after the
    // widest gap and pair neighbours.
    let mut unit = unit;
    unit.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    if unit.len() % 2 != 0 {
        return Err(fail(format!("odd number ({}) of unit-circle roots", unit.len())));
    }
    if unit.len() > 2 {
        let n = unit.len();
        let gap = |i: usize| {
            let next = if i + 1 < n { unit[i + 1].arg() } else { unit[0].arg() + 2.0 * std::f64::consts::PI };
            next - unit[i].arg()
        };
        let widest = (0..n).max_by(|&a, &b| gap(a).total_cmp(&gap(b))).unwrap_or(n - 1);
        unit.rotate_left((widest + 1) % n);
    }
    for pair in unit.chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        if (a - b).norm() > cluster_radius(tol) {
            return Err(fail(format!("unit-circle root near {a:.6} has odd multiplicity")));
        }
        let centre = (a + b) * 0.5;
        let on_circle = if centre.norm() > 0.0 { centre / centre.norm() } else { a };
        selected.push(on_circle);
        clusters.push((on_circle, 2));
    }
    Ok((selected, RootMultiset { roots: clusters, tolerance: tol }))
}

/// Angular radius for grouping smeared repeated roots on the unit circle.
fn cluster_radius(tol: f64) -> f64 {
    (tol.sqrt() * 10.0).max(tol)
}

/// Real monic polynomial (ascending) with the given conjugate-closed roots.
fn real_poly_from_roots(roots: &[Complex64], tol: f64) -> Result<Vec<f64>> {
    let imag_tol = 1e-7;
    let mut p = vec![1.0];
    let mut upper = Vec::new();
    let mut lower = 0usize;
    for &z in roots {
        if z.im.abs() <= imag_tol * z.norm().max(1.0) {
            p = poly_mul(&p, &[-z.re, 1.0]);
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower += 1;
        }
    }
    if upper.len() != lower {
        return Err(Error::RootPairing {
            tol,
            reason: "selected roots are not closed under conjugation".into(),
            roots: roots.to_vec(),
        });
    }
    for z in upper {
        p = poly_mul(&p, &[z.norm_sqr(), -2.0 * z.re, 1.0]);
    }
    Ok(p)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Gauss-Newton refinement of `autocorrelation(c) = r`. Steps are kept only if
/// they reduce the residual.
fn polish(c: &mut [f64], r: &[f64]) {
    let k = c.len();
    let resid = |c: &[f64]| -> DVector<f64> {
        let a = autocorrelation(c);
        DVector::from_iterator(k, r.iter().zip(&a).map(|(x, y)| x - y))
    };
    let mut res = resid(c);
    for _ in 0..6 {
        let n0 = res.norm();
        if n0 == 0.0 {
            break;
        }
        let j = DMatrix::from_fn(k, k, |l, i| {
            let a = if i + l < k { c[i + l] } else { 0.0 };
            let b = if i >= l { c[i - l] } else { 0.0 };
            a + b
        });
        let Ok(step) = j.svd(true, true).solve(&res, 1e-13) else { break };
        let trial: Vec<f64> = c.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
        let nres = resid(&trial);
        if nres.norm() < n0 {
            c.copy_from_slice(&trial);
            res = nres;
        } else {
            break;
        }
    }
}

fn normalize_sign(c: &mut [f64]) {
    let max = c.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if let Some(first) = c.iter().find(|x| x.abs() > 1e-12 * max) {
        if *first < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn factorize_lags(r: &[f64], d: usize, tol: f64) -> Result<Kernel> {
    let k = r.len();
    if r[0] <= 0.0 {
        if r.iter().all(|&x| x == 0.0) {
            return Kernel::new(vec![0.0; k], d);
        }
        return Err(Error::NotSelfConvolution { gamma: r[0] });
    }
    let m = (0..k).rev().find(|&l| r[l].abs() > 1e-13 * r[0]).unwrap_or(0);
    let mut coeffs = vec![0.0; k];
    if m == 0 {
        coeffs[0] = r[0].sqrt();
    } else {
        let q: Vec<f64> = (0..=2 * m).map(|i| r[i.abs_diff(m)]).collect();
        let roots = poly_roots(&q);
        let (selected, _) = select_roots(&roots, tol)?;
        if selected.len() != m {
            return Err(Error::RootPairing {
                tol,
                reason: format!("selected {} roots, expected {m}", selected.len()),
                roots,
            });
        }
        let p = real_poly_from_roots(&selected, tol)?;
        let r1 = autocorrelation(&p);
        let num: f64 = r.iter().zip(&r1).map(|(a, b)| a * b).sum();
        let den: f64 = r1.iter().map(|x| x * x).sum();
        let gamma = num / den;
        if gamma < -1e-8 {
            return Err(Error::NotSelfConvolution { gamma });
        }
        let g = gamma.max(0.0).sqrt();
        for (dst, src) in coeffs.iter_mut().zip(&p) {
            *dst = g * src;
        }
    }
    polish(&mut coeffs, r);
    let err = autocorrelation(&coeffs)
        .iter()
        .zip(r)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if err > 1e-6 * r[0] {
        return Err(Error::NotSelfConvolution { gamma: err / r[0] });
    }
    normalize_sign(&mut coeffs);
    Kernel::new(coeffs, d)
}

/// A kernel `c` with `c ⋆ c = q`, retrying with a doubled clustering tolerance on pairing failures.
pub fn spectral_factorize(q: &SelfConvolution, tol: &ToleranceConfig) -> Result<Kernel> {
    let mut ct = tol.cluster;
    let mut last = None;
    for _ in 0..=tol.cluster_retries {
        match factorize_lags(&q.lags, q.d, ct) {
            Err(e @ Error::RootPairing { .. }) => last = Some(e),
            other => return other,
        }
        ct *= 2.0;
    }
    Err(last.expect("at least one attempt"))
}

/// `c` with `c ⋆ c = a ⋆ a + b ⋆ b`.
pub fn combine_pair(a: &Kernel, b: &Kernel, tol: &ToleranceConfig) -> Result<Kernel> {
    combine_many(&[a.clone(), b.clone()], tol)
}

/// `c` with `c ⋆ c = Σ_l u_l ⋆ u_l`. The lags are summed and factored once,
/// which gives the same result as folding [`combine_pair`] with less rounding.
pub fn combine_many(kernels: &[Kernel], tol: &ToleranceConfig) -> Result<Kernel> {
    spectral_factorize(&SelfConvolution::from_kernels(kernels)?, tol)
}

/// Single-channel weights attaining the relaxation value for target `w`.
pub fn extract_rank1_weights(
    s: &SdpSolution,
    w: &SignalVector,
    k: usize,
    tol: &ToleranceConfig,
) -> Result<NetworkWeights> {
    let d = w.dim();
    if s.z.nrows() != k + d {
        return Err(Error::Dimension(format!(
            "solution has size {}, expected {}",
            s.z.nrows(),
            k + d
        )));
    }
    let f = psd_factor(&s.z, tol.rank);
    let kernels: Vec<Kernel> = (0..f.ncols())
        .map(|c| Kernel::new((0..k).map(|i| f[(i, c)]).collect(), d))
        .collect::<Result<_>>()?;
    let u = if kernels.is_empty() {
        Kernel::new(vec![0.0; k], d)?
    } else {
        combine_many(&kernels, tol)?
    };
    let wh = dft(w);
    let uh = dft_real(u.padded().values());
    let mut vh = vec![Complex64::new(0.0, 0.0); d];
    for i in 0..d {
        let (wi, ui) = (wh.values()[i], uh[i]);
        if wi.norm() <= tol.feas {
            continue;
        }
        if ui.norm() <= tol.div {
            return Err(Error::Extraction { index: i, u_hat_abs: ui.norm(), w_hat_abs: wi.norm() });
        }
        vh[i] = wi / ui;
    }
    let v: Vec<f64> = idft_complex(&vh).into_iter().map(|z| z.re).collect();
    let (nu, nv) = (u.norm_sqr().sqrt(), v.iter().map(|x| x * x).sum::<f64>().sqrt());
    let t = if nu > 0.0 && nv > 0.0 { (nv / nu).sqrt() } else { 1.0 };
    NetworkWeights::new(
        DMatrix::from_iterator(k, 1, u.values().iter().map(|x| x * t)),
        DMatrix::from_iterator(d, 1, v.iter().map(|x| x / t)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::circular_conv;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn self_conv(a: &Kernel) -> Vec<f64> {
        circular_conv(a, &a.padded()).unwrap().into_vec()
    }

    fn ker(v: &[f64], d: usize) -> Kernel {
        Kernel::new(v.to_vec(), d).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn lag_values_match_direct_self_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..6 {
            for d in k..3 * k {
                let a = ker(&(0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>(), d);
                let q = SelfConvolution::from_kernels(std::slice::from_ref(&a)).unwrap();
                assert!(max_diff(q.values().values(), &self_conv(&a)) < 1e-14);
            }
        }
    }

    #[test]
    fn pair_examples() {
        let tol = ToleranceConfig::default();
        let c = combine_pair(&ker(&[1.0, 0.0], 4), &ker(&[0.0, 1.0], 4), &tol).unwrap();
        assert!(max_diff(c.values(), &[2f64.sqrt(), 0.0]) < 1e-12);

        let c = combine_pair(&ker(&[1.0, 1.0], 4), &ker(&[1.0, -1.0], 4), &tol).unwrap();
        assert!(max_diff(&self_conv(&c), &[2.0, 0.0, 0.0, 0.0]) < 1e-12);
        assert!((c.norm_sqr() - 4.0).abs() < 1e-12);

        let a = ker(&[0.3, -1.2, 0.7], 5);
        let c = combine_pair(&a, &ker(&[0.0; 3], 5), &tol).unwrap();
        assert!(max_diff(&self_conv(&c), &self_conv(&a)) < 1e-12);
    }

    #[test]
    fn many_examples() {
        let tol = ToleranceConfig::default();
        let e = ker(&[1.0, 0.0], 4);
        let c = combine_many(&[e.clone(), e.clone(), e], &tol).unwrap();
        assert!(max_diff(c.values(), &[3f64.sqrt(), 0.0]) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ks: Vec<Kernel> = (0..4)
            .map(|_| ker(&(0..3).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>(), 8))
            .collect();
        let c = combine_many(&ks, &tol).unwrap();
        let mut want = vec![0.0; 8];
        for k in &ks {
            want.iter_mut().zip(self_conv(k)).for_each(|(a, b)| *a += b);
        }
        assert!(max_diff(&self_conv(&c), &want) < 1e-9);
    }

    #[test]
    fn factorize_from_signal() {
        let tol = ToleranceConfig::default();
        let q = SignalVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let c = spectral_factorize(&SelfConvolution::from_signal(&q, 2).unwrap(), &tol).unwrap();
        assert!(max_diff(c.values(), &[2f64.sqrt(), 0.0]) < 1e-12);

        let a = ker(&[1.0, -1.0], 4);
        let q = SignalVector::new(self_conv(&a)).unwrap();
        let c = spectral_factorize(&SelfConvolution::from_signal(&q, 2).unwrap(), &tol).unwrap();
        assert!(max_diff(&self_conv(&c), q.values()) < 1e-7);

        assert!(SelfConvolution::from_signal(&SignalVector::ones(3), 3).is_err());
    }

    #[test]
    fn repeated_unit_circle_roots() {
        // (1 - x)^2 (1 + x^2)^2 has double roots at 1 and ±i.
        let tol = ToleranceConfig::default();
        let a = ker(&[1.0, -2.0, 3.0, -4.0, 3.0, -2.0, 1.0], 16);
        let c = combine_many(&[a.clone(), a.clone()], &tol).unwrap();
        let want: Vec<f64> = self_conv(&a).iter().map(|x| 2.0 * x).collect();
        assert!(max_diff(&self_conv(&c), &want) < 1e-7);
    }

    #[test]
    fn random_round_trips() {
        let tol = ToleranceConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let k = rng.random_range(1..=8);
            let d = [2 * k - 1, 2 * k, 4 * k][rng.random_range(0..3)];
            let a = ker(&(0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>(), d);
            let b = ker(&(0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>(), d);
            let c = combine_pair(&a, &b, &tol).unwrap();
            let want: Vec<f64> = self_conv(&a).iter().zip(self_conv(&b)).map(|(x, y)| x + y).collect();
            assert!(max_diff(&self_conv(&c), &want) <= 1e-7);
            assert!((c.norm_sqr() - a.norm_sqr() - b.norm_sqr()).abs() <= 1e-9);
            let spec = dft(&SignalVector::new(self_conv(&c)).unwrap());
            assert!(spec.values().iter().all(|z| z.re >= -1e-9 && z.im.abs() < 1e-9));
        }
    }

    #[test]
    fn rejects_indefinite_input() {
        let tol = ToleranceConfig::default();
        let q = SelfConvolution { lags: vec![1.0, 2.0], d: 4 };
        assert!(spectral_factorize(&q, &tol).is_err());
    }
}
