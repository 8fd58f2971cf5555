//! JSON schema for `convreg sweep`.

use std::path::{Path, PathBuf};

use convreg_experiments::dataset::{augment_pad, load_idx, synth_separable, Dataset};
use convreg_experiments::train::{Activation, TrainConfig};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dataset: DatasetConfig,
    /// Zero-pad inputs into the top-left of a larger canvas `[H, W]`.
    #[serde(default)]
    pub pad: Option<(usize, usize)>,
    /// Kernel sizes; a number `k` means `(1, k)` for 1D data and `(k, k)` for images.
    pub kernels: Vec<KernelSpec>,
    pub channels: Vec<usize>,
    #[serde(default)]
    pub trainer: TrainerConfig,
    /// Write per-cell SVG and CSV files.
    #[serde(default = "yes")]
    pub plots: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic {
        d: usize,
        n: usize,
        #[serde(default = "default_gap")]
        gap: f64,
        #[serde(default)]
        seed: u64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        classes: (u8, u8),
        n_per_class: usize,
    },
}

fn default_gap() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum KernelSpec {
    Size(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub target_loss: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub activation: ActivationName,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            target_loss: t.target_loss,
            max_epochs: t.max_epochs,
            seed: t.seed,
            activation: ActivationName::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Linear,
    Relu,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        if cfg.kernels.is_empty() || cfg.channels.is_empty() {
            return Err(CliError::Input("kernels and channels must be non-empty".into()));
        }
        if cfg.channels.contains(&0) {
            return Err(CliError::Input("channel counts must be positive".into()));
        }
        if !(cfg.trainer.target_loss > 0.0) || !(cfg.trainer.learning_rate > 0.0) {
            return Err(CliError::Input("target_loss and learning_rate must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let DatasetConfig::Idx { images, labels, .. } = &mut cfg.dataset {
            let base = path.parent().unwrap_or(Path::new("."));
            *images = base.join(&*images);
            *labels = base.join(&*labels);
        }
        Ok(cfg)
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let data = match &self.dataset {
            DatasetConfig::Synthetic { d, n, gap, seed } => synth_separable(*d, *n, *gap, *seed)?,
            DatasetConfig::Idx { images, labels, classes, n_per_class } => {
                load_idx(images, labels, *classes, *n_per_class)?
            }
        };
        Ok(match self.pad {
            Some((h, w)) => augment_pad(&data, h, w)?,
            None => data,
        })
    }

    pub fn kernel_shapes(&self, data: &Dataset) -> Vec<(usize, usize)> {
        let (h, _) = data.shape();
        self.kernels
            .iter()
            .map(|k| match *k {
                KernelSpec::Size(k) if h == 1 => (1, k),
                KernelSpec::Size(k) => (k, k),
                KernelSpec::Pair(a, b) => (a, b),
            })
            .collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.trainer;
        TrainConfig {
            learning_rate: t.learning_rate,
            target_loss: t.target_loss,
            max_epochs: t.max_epochs,
            seed: t.seed,
            activation: match t.activation {
                ActivationName::Linear => Activation::Linear,
                ActivationName::Relu => Activation::Relu,
            },
            ..TrainConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTH: &str = r#"{
        "dataset": {"kind": "synthetic", "d": 8, "n": 4},
        "kernels": [1, [1, 4]],
        "channels": [1, 2],
        "trainer": {"activation": "relu", "seed": 3}
    }"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = SweepConfig::from_json(SYNTH).unwrap();
        assert_eq!(c.kernels, vec![KernelSpec::Size(1), KernelSpec::Pair(1, 4)]);
        assert!(c.plots);
        let t = c.train_config();
        assert_eq!(t.activation, Activation::Relu);
        assert_eq!(t.seed, 3);
        assert_eq!(t.target_loss, 1e-6);
        let data = c.dataset().unwrap();
        assert_eq!(c.kernel_shapes(&data), vec![(1, 1), (1, 4)]);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = SYNTH.replace("\"channels\"", "\"chanels\"");
        assert!(SweepConfig::from_json(&bad).is_err());
        let bad = SYNTH.replace("\"n\": 4", "\"n\": 4, \"noise\": 1");
        assert!(SweepConfig::from_json(&bad).is_err());
        let bad = SYNTH.replace("\"seed\": 3", "\"seed\": 3, \"momentum\": 0.9");
        assert!(SweepConfig::from_json(&bad).is_err());
        let bad = SYNTH.replace("relu", "tanh");
        assert!(SweepConfig::from_json(&bad).is_err());
        let bad = SYNTH.replace("[1, 2]", "[]");
        assert!(SweepConfig::from_json(&bad).is_err());
    }

    #[test]
    fn square_kernels_for_images() {
        let c = SweepConfig::from_json(
            r#"{"dataset": {"kind": "synthetic", "d": 4, "n": 2}, "pad": [3, 5],
                "kernels": [2, [1, 3]], "channels": [1]}"#,
        )
        .unwrap();
        let data = c.dataset().unwrap();
        assert_eq!(data.shape(), (3, 5));
        assert_eq!(c.kernel_shapes(&data), vec![(2, 2), (1, 3)]);
    }
}
