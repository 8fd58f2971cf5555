//! Full-batch gradient descent on the exponential loss for two-layer
//! convolutional networks `Φ(x) = Σ_c ⟨v_c, σ(u_c ⋆ x)⟩`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::conv2d::{convolve2d, correlate2d, Image};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Kernel shape `(K₁, K₂)`; 1D inputs use `(1, K)`.
    pub kernel: (usize, usize),
    pub channels: usize,
    pub learning_rate: f64,
    pub target_loss: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel: (1, 1),
            channels: 1,
            learning_rate: 0.1,
            target_loss: 1e-6,
            max_epochs: 500_000,
            seed: 0,
            activation: Activation::Linear,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let (h, w) = data.shape();
        let (kh, kw) = self.kernel;
        if kh == 0 || kw == 0 || kh > h || kw > w {
            return Err(Error::Config(format!("kernel {kh}x{kw} does not fit inputs {h}x{w}")));
        }
        if self.channels == 0 {
            return Err(Error::Config("channels must be positive".into()));
        }
        if !(self.target_loss > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("target loss and learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// First-layer kernels `u` and second-layer maps `v`, one per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub u: Vec<Image>,
    pub v: Vec<Image>,
}

impl ConvWeights {
    /// `‖U‖² + ‖V‖²`.
    pub fn cost(&self) -> f64 {
        self.u.iter().chain(&self.v).flat_map(|x| &x.data).map(|a| a * a).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let s = |xs: &[Image]| {
            xs.iter()
                .map(|x| Image { h: x.h, w: x.w, data: x.data.iter().map(|a| a * alpha).collect() })
                .collect()
        };
        Self { u: s(&self.u), v: s(&self.v) }
    }

    /// Linear predictor `w = Σ_c u_c * v_c`, so that `Φ(x) = ⟨w, x⟩` without activation.
    pub fn predictor(&self) -> Image {
        let (h, w) = (self.v[0].h, self.v[0].w);
        let mut out = Image::zeros(h, w);
        for (u, v) in self.u.iter().zip(&self.v) {
            for (o, a) in out.data.iter_mut().zip(convolve2d(u, v)) {
                *o += a;
            }
        }
        out
    }

    fn axpy(&mut self, a: f64, g: &ConvWeights) {
        for (x, y) in self.u.iter_mut().chain(self.v.iter_mut()).zip(g.u.iter().chain(&g.v)) {
            for (p, q) in x.data.iter_mut().zip(&y.data) {
                *p += a * q;
            }
        }
    }
}

pub fn init_weights(cfg: &TrainConfig, h: usize, w: usize) -> ConvWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (kh, kw) = cfg.kernel;
    let mut draw = |rows: usize, cols: usize| {
        let s = 1e-2 / ((rows * cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
        Image { h: rows, w: cols, data }
    };
    let u = (0..cfg.channels).map(|_| draw(kh, kw)).collect();
    let v = (0..cfg.channels).map(|_| draw(h, w)).collect();
    ConvWeights { u, v }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn crop(x: Vec<f64>, w: usize, kh: usize, kw: usize) -> Image {
    let mut data = Vec::with_capacity(kh * kw);
    for a in 0..kh {
        data.extend_from_slice(&x[a * w..a * w + kw]);
    }
    Image { h: kh, w: kw, data }
}

/// Network outputs on every input.
pub fn outputs(p: &ConvWeights, data: &Dataset, act: Activation) -> Vec<f64> {
    match act {
        Activation::Linear => {
            let w = p.predictor();
            data.inputs.iter().map(|x| dot(&w.data, &x.data)).collect()
        }
        Activation::Relu => data
            .inputs
            .iter()
            .map(|x| {
                p.u.iter()
                    .zip(&p.v)
                    .map(|(u, v)| {
                        let h = correlate2d(u, x);
                        v.data.iter().zip(h).map(|(a, b)| a * b.max(0.0)).sum::<f64>()
                    })
                    .sum()
            })
            .collect(),
    }
}

pub fn loss(p: &ConvWeights, data: &Dataset, act: Activation) -> f64 {
    outputs(p, data, act).iter().zip(&data.labels).map(|(f, y)| (-y * f).exp()).sum()
}

/// Loss and gradient of `Σ_n exp(-y_n Φ(x_n))`.
pub fn loss_and_gradient(p: &ConvWeights, data: &Dataset, act: Activation) -> (f64, ConvWeights) {
    let (h, w) = data.shape();
    let (kh, kw) = (p.u[0].h, p.u[0].w);
    let phi = outputs(p, data, act);
    let s: Vec<f64> = phi.iter().zip(&data.labels).map(|(f, y)| -y * (-y * f).exp()).collect();
    let l = phi.iter().zip(&data.labels).map(|(f, y)| (-y * f).exp()).sum();
    let mut g = ConvWeights {
        u: p.u.iter().map(|u| Image::zeros(u.h, u.w)).collect(),
        v: p.v.iter().map(|v| Image::zeros(v.h, v.w)).collect(),
    };
    match act {
        Activation::Linear => {
            // dL/dw = Σ s_n x_n; then chain through w = Σ u_c * v_c.
            let mut gw = Image::zeros(h, w);
            for (x, sn) in data.inputs.iter().zip(&s) {
                for (o, a) in gw.data.iter_mut().zip(&x.data) {
                    *o += sn * a;
                }
            }
            for c in 0..p.u.len() {
                g.v[c].data = correlate2d(&p.u[c], &gw);
                g.u[c] = crop(correlate2d(&p.v[c], &gw), w, kh, kw);
            }
        }
        Activation::Relu => {
            for (x, sn) in data.inputs.iter().zip(&s) {
                for c in 0..p.u.len() {
                    let pre = correlate2d(&p.u[c], x);
                    let mut masked = Image::zeros(h, w);
                    for i in 0..h * w {
                        if pre[i] > 0.0 {
                            g.v[c].data[i] += sn * pre[i];
                            masked.data[i] = p.v[c].data[i];
                        }
                    }
                    let gu = correlate2d(&masked, x);
                    for a in 0..kh {
                        for b in 0..kw {
                            g.u[c].data[a * kw + b] += sn * gu[a * w + b];
                        }
                    }
                }
            }
        }
    }
    (l, g)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: ConvWeights,
    /// Loss after each accepted epoch, starting with the initial loss.
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        *self.trace.last().unwrap_or(&f64::INFINITY)
    }
}

const LR_GROWTH: f64 = 1.05;

/// Gradient descent with step halving on loss increase and growth on decrease.
/// Rejected steps do not count as epochs.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate(data)?;
    let (h, w) = data.shape();
    let mut p = init_weights(cfg, h, w);
    let act = cfg.activation;
    let (mut l, mut g) = loss_and_gradient(&p, data, act);
    let mut trace = vec![l];
    let mut lr = cfg.learning_rate;
    let mut epochs = 0;
    while l > cfg.target_loss && epochs < cfg.max_epochs {
        let mut cand = p.clone();
        cand.axpy(-lr, &g);
        let (lc, gc) = loss_and_gradient(&cand, data, act);
        if !(lc <= l) {
            lr *= 0.5;
            if lr < f64::MIN_POSITIVE {
                break;
            }
            continue;
        }
        p = cand;
        l = lc;
        g = gc;
        lr *= LR_GROWTH;
        epochs += 1;
        trace.push(l);
    }
    Ok(TrainOutcome { weights: p, trace, converged: l <= cfg.target_loss })
}

/// Smallest `y_n Φ(x_n)`.
pub fn min_margin(p: &ConvWeights, data: &Dataset, act: Activation) -> f64 {
    outputs(p, data, act)
        .iter()
        .zip(&data.labels)
        .map(|(f, y)| y * f)
        .fold(f64::INFINITY, f64::min)
}

/// Rescales both layers by `m^{-1/2}` so the smallest margin becomes one.
pub fn margin_normalize(p: &ConvWeights, data: &Dataset, act: Activation) -> Result<ConvWeights> {
    let m = min_margin(p, data, act);
    if !(m > 0.0) {
        return Err(Error::NonPositiveMargin(m));
    }
    Ok(p.scaled(m.powf(-0.5)))
}
