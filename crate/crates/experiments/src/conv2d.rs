//! Circular 2D convolution with the unitary `1/√(HW)` scaling, and the 2D DFT.
//!
//! 1D signals are treated as `1×D` images throughout.

use convreg_core::spectral::{dft_complex, idft_complex};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A real `H×W` array stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || data.len() != h * w {
            return Err(Error::Dimension(format!(
                "{} values do not form a {h}x{w} image",
                data.len()
            )));
        }
        Ok(Self { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, data: vec![0.0; h * w] }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.w + j]
    }
}

/// Kernels with more taps than this go through the Fourier path.
const DIRECT_LIMIT: usize = 64;

/// `out[i, j] = (1/√(HW)) Σ_{a,b} k[a, b] x[(i + a) mod H, (j + b) mod W]`.
pub fn conv2d_circular(kernel: &Image, image: &Image) -> Result<Image> {
    check(kernel, image)?;
    Ok(Image { h: image.h, w: image.w, data: correlate2d(kernel, image) })
}

fn check(kernel: &Image, image: &Image) -> Result<()> {
    if kernel.h > image.h || kernel.w > image.w {
        return Err(Error::Dimension(format!(
            "kernel {}x{} larger than image {}x{}",
            kernel.h, kernel.w, image.h, image.w
        )));
    }
    Ok(())
}

pub(crate) fn correlate2d(k: &Image, x: &Image) -> Vec<f64> {
    if k.data.len() > DIRECT_LIMIT {
        return fourier_product(k, x, true);
    }
    correlate2d_direct(k, x)
}

fn correlate2d_direct(k: &Image, x: &Image) -> Vec<f64> {
    let (h, w) = (x.h, x.w);
    let s = 1.0 / ((h * w) as f64).sqrt();
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for a in 0..k.h {
                let row = ((i + a) % h) * w;
                for b in 0..k.w {
                    acc += k.data[a * k.w + b] * x.data[row + (j + b) % w];
                }
            }
            out[i * w + j] = acc * s;
        }
    }
    out
}

/// `out[i, j] = (1/√(HW)) Σ_{a,b} k[a, b] x[(i - a) mod H, (j - b) mod W]`.
pub(crate) fn convolve2d(k: &Image, x: &Image) -> Vec<f64> {
    if k.data.len() > DIRECT_LIMIT {
        return fourier_product(k, x, false);
    }
    let (h, w) = (x.h, x.w);
    let s = 1.0 / ((h * w) as f64).sqrt();
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for a in 0..k.h {
                let row = ((i + h - a % h) % h) * w;
                for b in 0..k.w {
                    acc += k.data[a * k.w + b] * x.data[row + (j + w - b % w) % w];
                }
            }
            out[i * w + j] = acc * s;
        }
    }
    out
}

fn pad(k: &Image, h: usize, w: usize) -> Image {
    let mut p = Image::zeros(h, w);
    for a in 0..k.h {
        for b in 0..k.w {
            p.data[a * w + b] = k.data[a * k.w + b];
        }
    }
    p
}

fn fourier_product(k: &Image, x: &Image, conjugate: bool) -> Vec<f64> {
    let kh = dft2d(&pad(k, x.h, x.w));
    let xh = dft2d(x);
    let prod: Vec<Complex64> = kh
        .iter()
        .zip(&xh)
        .map(|(a, b)| if conjugate { a.conj() * b } else { a * b })
        .collect();
    idft2d(&prod, x.h, x.w).into_iter().map(|z| z.re).collect()
}

fn transform2d(data: &[Complex64], h: usize, w: usize, inverse: bool) -> Vec<Complex64> {
    let f = if inverse { idft_complex } else { dft_complex };
    let mut rows: Vec<Complex64> = data.chunks(w).flat_map(f).collect();
    for j in 0..w {
        let col: Vec<Complex64> = (0..h).map(|i| rows[i * w + j]).collect();
        for (i, z) in f(&col).into_iter().enumerate() {
            rows[i * w + j] = z;
        }
    }
    rows
}

/// Unitary 2D DFT, row-major.
pub fn dft2d(x: &Image) -> Vec<Complex64> {
    let c: Vec<Complex64> = x.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform2d(&c, x.h, x.w, false)
}

pub fn idft2d(s: &[Complex64], h: usize, w: usize) -> Vec<Complex64> {
    transform2d(s, h, w, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
        Image::new(h, w, (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn scalar_kernel_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng, 3, 5);
        let k = Image::new(1, 1, vec![2.5]).unwrap();
        let y = conv2d_circular(&k, &x).unwrap();
        for (a, b) in y.data.iter().zip(&x.data) {
            assert!((a - 2.5 * b / 15f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn full_kernel_on_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = random(&mut rng, 3, 4);
        let mut delta = Image::zeros(3, 4);
        delta.data[0] = 1.0;
        let y = conv2d_circular(&k, &delta).unwrap();
        let s = 1.0 / 12f64.sqrt();
        for i in 0..3 {
            for j in 0..4 {
                let want = k.at((3 - i) % 3, (4 - j) % 4) * s;
                assert!((y.at(i, j) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fourier_path_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (h, w, kh, kw) in [(5, 6, 2, 3), (8, 8, 8, 8), (7, 9, 7, 9), (1, 16, 1, 16)] {
            let k = random(&mut rng, kh, kw);
            let x = random(&mut rng, h, w);
            let a = correlate2d_direct(&k, &x);
            let b = fourier_product(&k, &x, true);
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-9));
            // Convolution theorem on the spectrum.
            let spec = dft2d(&Image::new(h, w, a).unwrap());
            let kh_ = dft2d(&pad(&k, h, w));
            let xh = dft2d(&x);
            for i in 0..h * w {
                assert!((spec[i] - kh_[i].conj() * xh[i]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn convolve_is_adjoint_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = random(&mut rng, 2, 3);
        let x = random(&mut rng, 4, 5);
        let v = random(&mut rng, 4, 5);
        // ⟨v, k ⋆ x⟩ = ⟨x, convolve(k, v)⟩.
        let lhs: f64 = v.data.iter().zip(correlate2d(&k, &x)).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(convolve2d(&k, &v)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized_kernel() {
        assert!(conv2d_circular(&Image::zeros(3, 1), &Image::zeros(2, 2)).is_err());
    }
}
