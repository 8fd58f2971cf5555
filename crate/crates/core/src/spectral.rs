//! Circular convolution, unitary DFT, flips and the two-layer predictor map.
//!
//! All transforms are unitary: `F[k, l] = exp(-2πi k l / D) / √D`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A real signal of fixed length `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalVector {
    values: Vec<f64>,
}

impl SignalVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("signal must have length >= 1".into()));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite entry at index {i}")));
        }
        Ok(Self { values })
    }

    pub fn zeros(d: usize) -> Self {
        Self { values: vec![0.0; d.max(1)] }
    }

    /// `[1, 0, ..., 0]`.
    pub fn delta(d: usize) -> Self {
        let mut v = vec![0.0; d.max(1)];
        v[0] = 1.0;
        Self { values: v }
    }

    pub fn ones(d: usize) -> Self {
        Self { values: vec![1.0; d.max(1)] }
    }

    /// Tiles `pattern` `reps` times.
    pub fn tiled(pattern: &[f64], reps: usize) -> Result<Self> {
        let mut v = Vec::with_capacity(pattern.len() * reps);
        for _ in 0..reps {
            v.extend_from_slice(pattern);
        }
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        l2(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { values: self.values.iter().map(|x| a * x).collect() }
    }
}

/// A complex spectrum of length `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).sum()
    }

    pub fn l2(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max_p |s[p] - conj(s[-p])|`.
    pub fn symmetry_violation(&self) -> f64 {
        let d = self.values.len();
        (0..d)
            .map(|p| (self.values[p] - self.values[(d - p) % d].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// True when the spectrum is the DFT of a real signal, relative to its scale.
    pub fn is_real_origin(&self, tol: f64) -> bool {
        self.symmetry_violation() <= tol * self.scale()
    }

    fn scale(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(1.0, f64::max)
    }
}

/// A real kernel of length `K` acting on signals of length `base_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    values: Vec<f64>,
    base_dim: usize,
}

impl Kernel {
    pub fn new(values: Vec<f64>, base_dim: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("kernel must have length >= 1".into()));
        }
        if values.len() > base_dim {
            return Err(Error::Dimension(format!(
                "kernel length {} exceeds base dimension {base_dim}",
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("kernel has non-finite entries".into()));
        }
        Ok(Self { values, base_dim })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    /// The kernel as a signal of length `base_dim` (zero padded).
    pub fn padded(&self) -> SignalVector {
        let mut v = vec![0.0; self.base_dim];
        v[..self.values.len()].copy_from_slice(&self.values);
        SignalVector { values: v }
    }
}

/// Coefficients of `p(x) = Σ c[k] x^k`, ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialRepr {
    pub coefficients: Vec<f64>,
}

impl PolynomialRepr {
    pub fn from_kernel(u: &Kernel) -> Self {
        Self { coefficients: u.values.clone() }
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    /// Degree ignoring trailing zeros; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients.iter().rposition(|&c| c != 0.0)
    }
}

/// First-layer kernels `U` (K×C) and second-layer weights `V` (D×C).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl NetworkWeights {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(Error::Dimension(format!(
                "U has {} channels, V has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        if u.nrows() == 0 || u.nrows() > v.nrows() {
            return Err(Error::Dimension(format!(
                "kernel size {} must be in 1..={}",
                u.nrows(),
                v.nrows()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn k(&self) -> usize {
        self.u.nrows()
    }

    pub fn d(&self) -> usize {
        self.v.nrows()
    }

    pub fn channels(&self) -> usize {
        self.u.ncols()
    }

    /// `‖U‖² + ‖V‖²`.
    pub fn cost(&self) -> f64 {
        self.u.norm_squared() + self.v.norm_squared()
    }

    pub fn scaled(&self, a: f64, b: f64) -> Self {
        Self { u: &self.u * a, v: &self.v * b }
    }
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Unitary DFT of a complex sequence. FFT for power-of-two lengths, direct sum otherwise.
pub fn dft_complex(x: &[Complex64]) -> Vec<Complex64> {
    transform(x, false)
}

/// Inverse unitary DFT of a complex sequence.
pub fn idft_complex(x: &[Complex64]) -> Vec<Complex64> {
    transform(x, true)
}

fn transform(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let d = x.len();
    if d == 0 {
        return Vec::new();
    }
    let scale = 1.0 / (d as f64).sqrt();
    if d.is_power_of_two() {
        let mut planner = FftPlanner::new();
        let fft = if inverse {
            planner.plan_fft_inverse(d)
        } else {
            planner.plan_fft_forward(d)
        };
        let mut buf = x.to_vec();
        fft.process(&mut buf);
        buf.iter_mut().for_each(|z| *z *= scale);
        return buf;
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let tw: Vec<Complex64> = (0..d)
        .map(|j| Complex64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * j as f64 / d as f64))
        .collect();
    (0..d)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, &v) in x.iter().enumerate() {
                acc += v * tw[(k * l) % d];
            }
            acc * scale
        })
        .collect()
}

/// Unitary DFT of a real signal.
pub fn dft(v: &SignalVector) -> Spectrum {
    Spectrum::new(dft_real(&v.values))
}

pub(crate) fn dft_real(x: &[f64]) -> Vec<Complex64> {
    let c: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    dft_complex(&c)
}

/// Inverse DFT; rejects spectra that are not conjugate symmetric to 1e-9 (relative).
pub fn idft(s: &Spectrum) -> Result<SignalVector> {
    idft_with_tol(s, 1e-9)
}

pub fn idft_with_tol(s: &Spectrum, tol: f64) -> Result<SignalVector> {
    if !s.is_real_origin(tol) {
        return Err(Error::NonRealSpectrum { violation: s.symmetry_violation() });
    }
    let x = idft_complex(&s.values);
    SignalVector::new(x.into_iter().map(|z| z.re).collect())
}

/// `F_K u`: the DFT of `u` zero padded to its base dimension.
pub fn kernel_spectrum(u: &Kernel) -> Spectrum {
    dft(&u.padded())
}

/// `(u ⋆ v)[d] = (1/√D) Σ_k u[k] v[(d + k) mod D]`.
pub fn circular_conv(u: &Kernel, v: &SignalVector) -> Result<SignalVector> {
    if u.base_dim != v.dim() {
        return Err(Error::Dimension(format!(
            "kernel base dimension {} does not match signal length {}",
            u.base_dim,
            v.dim()
        )));
    }
    Ok(SignalVector { values: correlate(&u.values, &v.values) })
}

/// Slice form of [`circular_conv`]; `u` may have any length up to `v.len()`.
pub fn correlate(u: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    let s = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|i| u.iter().enumerate().map(|(k, &uk)| uk * v[(i + k) % d]).sum::<f64>() * s)
        .collect()
}

/// `(1/√D) Σ_k u[k] v[(d - k) mod D]`, the flipped form used by the network.
pub fn convolve(u: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    let s = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|i| {
            u.iter()
                .enumerate()
                .map(|(k, &uk)| uk * v[(i + d - k % d) % d])
                .sum::<f64>()
                * s
        })
        .collect()
}

/// `out[d] = v[D - d - 1]`.
pub fn flip(v: &SignalVector) -> SignalVector {
    let mut values = v.values.clone();
    values.reverse();
    SignalVector { values }
}

/// `w(U, V) = Σ_c flip(U[:, c] ⋆ flip(V[:, c]))`, computed in the signal domain.
pub fn predictor_from_weights(p: &NetworkWeights) -> SignalVector {
    let d = p.d();
    let mut w = vec![0.0; d];
    for c in 0..p.channels() {
        let u: Vec<f64> = p.u.column(c).iter().copied().collect();
        let mut fv: Vec<f64> = p.v.column(c).iter().copied().collect();
        fv.reverse();
        let mut z = correlate(&u, &fv);
        z.reverse();
        w.iter_mut().zip(&z).for_each(|(a, b)| *a += b);
    }
    SignalVector { values: w }
}

/// `ŵ = Σ_c Û[:, c] ⊙ V̂[:, c]`, the Fourier form of the predictor.
pub fn predictor_spectrum(p: &NetworkWeights) -> Spectrum {
    let d = p.d();
    let mut out = vec![Complex64::new(0.0, 0.0); d];
    for c in 0..p.channels() {
        let mut u = vec![0.0; d];
        for (k, x) in p.u.column(c).iter().enumerate() {
            u[k] = *x;
        }
        let uh = dft_real(&u);
        let vh = dft_real(p.v.column(c).as_slice());
        out.iter_mut()
            .zip(uh.iter().zip(&vh))
            .for_each(|(o, (a, b))| *o += a * b);
    }
    Spectrum::new(out)
}

/// The first `cols` columns of the unitary DFT matrix of size `d`.
pub fn dft_matrix(d: usize, cols: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (d as f64).sqrt();
    DMatrix::from_fn(d, cols, |r, c| {
        let ang = -2.0 * std::f64::consts::PI * ((r * c) % d) as f64 / d as f64;
        Complex64::from_polar(s, ang)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let d = x.len();
        (0..d)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(l, &v)| {
                        v * Complex64::from_polar(
                            1.0,
                            -2.0 * std::f64::consts::PI * (k * l) as f64 / d as f64,
                        )
                    })
                    .sum::<Complex64>()
                    / (d as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn conv_examples() {
        let v = SignalVector::new(vec![3.0, 1.0, 4.0, 1.0]).unwrap();
        let u = Kernel::new(vec![1.0], 4).unwrap();
        assert!(close(circular_conv(&u, &v).unwrap().values(), &[1.5, 0.5, 2.0, 0.5], 1e-15));

        let u = Kernel::new(vec![1.0, 2.0], 4).unwrap();
        let e0 = SignalVector::delta(4);
        assert!(close(circular_conv(&u, &e0).unwrap().values(), &[0.5, 0.0, 0.0, 1.0], 1e-15));

        let u = Kernel::new(vec![1.0, 1.0], 4).unwrap();
        let ones = SignalVector::ones(4);
        assert!(close(circular_conv(&u, &ones).unwrap().values(), &[1.0; 4], 1e-15));
    }

    #[test]
    fn conv_dimension_mismatch() {
        let u = Kernel::new(vec![1.0], 3).unwrap();
        assert!(matches!(circular_conv(&u, &SignalVector::ones(4)), Err(Error::Dimension(_))));
        assert!(Kernel::new(vec![1.0; 5], 4).is_err());
    }

    #[test]
    fn dft_examples() {
        let s = dft(&SignalVector::delta(4));
        assert!(s.values().iter().all(|z| (z - Complex64::new(0.5, 0.0)).norm() < 1e-15));
        let s = dft(&SignalVector::ones(4));
        assert!((s.values()[0] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(s.values()[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn dft_matches_naive_for_all_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..=33 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = dft_real(&x);
            let b = naive_dft(&x);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).norm() < 1e-12, "d={d}");
            }
            let back = idft(&Spectrum::new(a.clone())).unwrap();
            assert!(close(back.values(), &x, 1e-12));
            let n1 = l2(&x);
            let n2 = Spectrum::new(a).l2();
            assert!((n1 - n2).abs() < 1e-12);
        }
    }

    #[test]
    fn idft_rejects_non_real_spectrum() {
        let s = Spectrum::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        assert!(matches!(idft(&s), Err(Error::NonRealSpectrum { .. })));
    }

    #[test]
    fn kernel_spectrum_is_padded_dft() {
        let s = kernel_spectrum(&Kernel::new(vec![1.0], 4).unwrap());
        assert!(s.values().iter().all(|z| (z - Complex64::new(0.5, 0.0)).norm() < 1e-15));
        let s = kernel_spectrum(&Kernel::new(vec![1.0, 1.0], 4).unwrap());
        let want = naive_dft(&[1.0, 1.0, 0.0, 0.0]);
        assert!(s.values().iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-15));
        assert!((s.l2() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn flip_examples() {
        let v = SignalVector::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(flip(&v).values(), &[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(flip(&flip(&v)), v);
        let one = SignalVector::new(vec![7.0]).unwrap();
        assert_eq!(flip(&one), one);
    }

    #[test]
    fn predictor_scalar_kernel() {
        let w0 = [1.0, -2.0, 0.5, 3.0, 0.25];
        let p = NetworkWeights::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_column_slice(5, 1, &w0),
        )
        .unwrap();
        let w = predictor_from_weights(&p);
        let want: Vec<f64> = w0.iter().map(|x| x / 5f64.sqrt()).collect();
        assert!(close(w.values(), &want, 1e-15));
    }

    #[test]
    fn predictor_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let v = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let p = NetworkWeights::new(u, v).unwrap();
        let w = dft(&predictor_from_weights(&p));
        let wh = predictor_spectrum(&p);
        for (a, b) in w.values().iter().zip(wh.values()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_channel_is_inert() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = DMatrix::from_fn(2, 1, |_, _| rng.random_range(-1.0..1.0));
        let v = DMatrix::from_fn(5, 1, |_, _| rng.random_range(-1.0..1.0));
        let one = NetworkWeights::new(u.clone(), v.clone()).unwrap();
        let two = NetworkWeights::new(u.insert_column(1, 0.0), v.insert_column(1, 0.0)).unwrap();
        assert!(close(
            predictor_from_weights(&one).values(),
            predictor_from_weights(&two).values(),
            1e-15
        ));
    }

    #[test]
    fn convolve_is_flipped_correlate() {
        let u = [1.0, 2.0, -1.0];
        let v = [0.5, -1.0, 2.0, 3.0, 1.0];
        let mut fv = v.to_vec();
        fv.reverse();
        let mut z = correlate(&u, &fv);
        z.reverse();
        assert!(close(&convolve(&u, &v), &z, 1e-14));
    }

    #[test]
    fn polynomial_eval() {
        let p = PolynomialRepr { coefficients: vec![1.0, 2.0, 0.0] };
        assert_eq!(p.degree(), Some(1));
        assert!((p.eval(Complex64::new(3.0, 0.0)).re - 7.0).abs() < 1e-15);
    }
}
