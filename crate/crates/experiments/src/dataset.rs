//! Binary classification datasets: synthetic separable data and IDX files.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::conv2d::Image;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Synthetic,
    IdxFile,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Vec<Image>,
    pub labels: Vec<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Builds a dataset after checking shapes, labels and linear separability.
    pub fn new(inputs: Vec<Image>, labels: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let (h, w) = (inputs[0].h, inputs[0].w);
        if inputs.iter().any(|x| x.h != h || x.w != w) {
            return Err(Error::Dimension("inputs have different shapes".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Config("labels must be +1 or -1".into()));
        }
        let data = Self { inputs, labels, provenance };
        if separating_direction(&data).is_none() {
            return Err(Error::NotSeparable);
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.inputs[0].h, self.inputs[0].w)
    }
}

const PERCEPTRON_EPOCHS: usize = 100_000;

/// Runs the perceptron; returns a direction with positive margin on every point,
/// or `None` if none was found within the epoch budget.
pub fn separating_direction(data: &Dataset) -> Option<Vec<f64>> {
    let n = data.inputs[0].data.len();
    let mut w = vec![0.0; n];
    for _ in 0..PERCEPTRON_EPOCHS {
        let mut mistakes = 0;
        for (x, &y) in data.inputs.iter().zip(&data.labels) {
            let s: f64 = w.iter().zip(&x.data).map(|(a, b)| a * b).sum();
            if y * s <= 0.0 {
                mistakes += 1;
                for (wi, xi) in w.iter_mut().zip(&x.data) {
                    *wi += y * xi;
                }
            }
        }
        if mistakes == 0 {
            return Some(w);
        }
    }
    None
}

/// Unit teacher `cos(2π f d / D)` scaled to norm one, with `f = D/4` (or 1 for tiny D).
pub fn teacher(d: usize) -> Vec<f64> {
    let f = (d / 2) as f64;
    let t: Vec<f64> = (0..d).map(|i| (2.0 * PI * f * i as f64 / d as f64).cos()).collect();
    let n = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    t.into_iter().map(|v| v / n).collect()
}

/// Gaussian inputs of length `d`, kept only if `|⟨teacher, x⟩| ≥ gap`; labels
/// alternate `+1, -1, ...` so the classes are balanced.
pub fn synth_separable(d: usize, n: usize, gap: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    if d == 0 || !(gap > 0.0) {
        return Err(Error::Config("dimension and margin gap must be positive".into()));
    }
    let t = teacher(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let x = loop {
            let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let s: f64 = x.iter().zip(&t).map(|(a, b)| a * b).sum();
            if s.abs() < gap {
                continue;
            }
            if s.signum() != y {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            break x;
        };
        inputs.push(Image::new(1, d, x)?);
        labels.push(y);
    }
    Dataset::new(inputs, labels, Provenance::Synthetic)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> Result<u32> {
        let end = self.pos + 4;
        let b = self.bytes.get(self.pos..end).ok_or_else(|| Error::Parse {
            offset: self.pos,
            reason: "unexpected end of header".into(),
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn payload(&self, len: usize) -> Result<&'a [u8]> {
        self.bytes.get(self.pos..self.pos + len).ok_or_else(|| Error::Parse {
            offset: self.bytes.len(),
            reason: format!("payload truncated, expected {len} bytes from offset {}", self.pos),
        })
    }
}

fn check_magic(r: &mut Reader, dims: u8) -> Result<()> {
    let magic = r.u32()?;
    let [z0, z1, dtype, nd] = magic.to_be_bytes();
    if z0 != 0 || z1 != 0 {
        return Err(Error::Parse { offset: 0, reason: format!("bad magic number {magic:#010x}") });
    }
    if dtype != 0x08 {
        return Err(Error::Parse { offset: 2, reason: format!("unsupported dtype {dtype:#04x}") });
    }
    if nd != dims {
        return Err(Error::Parse {
            offset: 3,
            reason: format!("expected {dims} dimensions, found {nd}"),
        });
    }
    Ok(())
}

/// Parses an IDX image file into `(rows, cols, images)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<&[u8]>)> {
    let mut r = Reader { bytes, pos: 0 };
    check_magic(&mut r, 3)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let size = rows * cols;
    let payload = r.payload(count * size)?;
    Ok((rows, cols, payload.chunks(size.max(1)).take(count).collect()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let mut r = Reader { bytes, pos: 0 };
    check_magic(&mut r, 1)?;
    let count = r.u32()? as usize;
    r.payload(count)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// First `n_per_class` images of each class in file order; `classes.0 → +1`,
/// `classes.1 → -1`, pixels scaled to `[0, 1]`, samples interleaved by class.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    classes: (u8, u8),
    n_per_class: usize,
) -> Result<Dataset> {
    let image_bytes = read(images_path)?;
    let label_bytes = read(labels_path)?;
    select_classes(&image_bytes, &label_bytes, classes, n_per_class)
}

pub fn select_classes(
    image_bytes: &[u8],
    label_bytes: &[u8],
    classes: (u8, u8),
    n_per_class: usize,
) -> Result<Dataset> {
    let (rows, cols, images) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if images.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    if n_per_class == 0 || classes.0 == classes.1 {
        return Err(Error::Config("need two distinct classes and n_per_class > 0".into()));
    }
    let pick = |c: u8| -> Vec<usize> {
        labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i).take(n_per_class).collect()
    };
    let (pos, neg) = (pick(classes.0), pick(classes.1));
    for (c, found) in [(classes.0, pos.len()), (classes.1, neg.len())] {
        if found < n_per_class {
            return Err(Error::Config(format!(
                "class {c} has {found} samples, {n_per_class} requested"
            )));
        }
    }
    let to_image = |i: usize| {
        Image::new(rows, cols, images[i].iter().map(|&p| p as f64 / 255.0).collect())
    };
    let mut inputs = Vec::with_capacity(2 * n_per_class);
    let mut ys = Vec::with_capacity(2 * n_per_class);
    for (&p, &q) in pos.iter().zip(&neg) {
        inputs.push(to_image(p)?);
        ys.push(1.0);
        inputs.push(to_image(q)?);
        ys.push(-1.0);
    }
    Dataset::new(inputs, ys, Provenance::IdxFile)
}

/// Zero-pads each input into the top-left corner of an `out_h × out_w` canvas.
pub fn augment_pad(data: &Dataset, out_h: usize, out_w: usize) -> Result<Dataset> {
    let (h, w) = data.shape();
    if out_h < h || out_w < w {
        return Err(Error::Dimension(format!("cannot pad {h}x{w} into {out_h}x{out_w}")));
    }
    let inputs = data
        .inputs
        .iter()
        .map(|x| {
            let mut p = Image::zeros(out_h, out_w);
            for i in 0..h {
                p.data[i * out_w..i * out_w + w].copy_from_slice(&x.data[i * w..(i + 1) * w]);
            }
            p
        })
        .collect();
    Ok(Dataset { inputs, labels: data.labels.clone(), provenance: data.provenance })
}

/// Serializes images to IDX bytes; used to build test fixtures.
pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[Vec<u8>]) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, 0x03];
    for v in [pixels.len(), rows, cols] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    pixels.iter().for_each(|p| out.extend_from_slice(p));
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, 0x01];
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
