use convreg_core::closed_form::r_best;
use convreg_core::spectral::SignalVector;
use convreg_core::ToleranceConfig;
use convreg_experiments::dataset::{
    augment_pad, encode_idx_images, encode_idx_labels, load_idx, synth_separable,
};
use convreg_experiments::sweep::{channel_spread, sweep, to_csv, CellStatus};
use convreg_experiments::train::{
    margin_normalize, min_margin, train, Activation, TrainConfig,
};

#[test]
fn learned_cost_dominates_induced_regularizer() {
    let data = synth_separable(8, 8, 0.5, 4).unwrap();
    let tol = ToleranceConfig::default();
    for k in [1, 2, 3, 8] {
        let cfg = TrainConfig { kernel: (1, k), channels: 2, ..Default::default() };
        let out = train(&data, &cfg).unwrap();
        assert!(out.converged);
        let q = margin_normalize(&out.weights, &data, Activation::Linear).unwrap();
        let w = SignalVector::new(q.predictor().data).unwrap();
        let r = r_best(&w, k, &tol).unwrap().value;
        assert!(q.cost() >= r * (1.0 - 1e-6), "K={k}: {} < {r}", q.cost());
        // Gradient descent lands close to the minimum-norm factorization.
        assert!(q.cost() <= r * 1.05, "K={k}: {} vs {r}", q.cost());
    }
}

#[test]
fn full_kernel_cost_bounded_by_spectral_l1() {
    let data = synth_separable(16, 16, 0.5, 0).unwrap();
    let recs = sweep(&data, &[(1, 16)], &[1, 4], &TrainConfig::default());
    for r in &recs {
        let l1: f64 = r.spectrum_abs.iter().sum();
        assert!(r.r_hat >= 2.0 * l1 - 1e-9);
    }
}

#[test]
fn synthetic_grid_trends() {
    let data = synth_separable(16, 16, 0.5, 0).unwrap();
    let kernels = [(1, 1), (1, 4), (1, 16)];
    let recs = sweep(&data, &kernels, &[1, 2, 4, 8], &TrainConfig::default());
    assert_eq!(recs.len(), 12);
    assert_eq!(to_csv(&recs, false).lines().count(), 13);
    for r in &recs {
        assert_eq!(r.status, CellStatus::Converged);
        assert!(r.final_loss <= 1e-6);
    }
    for k in kernels {
        assert!(channel_spread(&recs, k).unwrap() <= 0.05);
    }
}

#[test]
fn deterministic_csv() {
    let data = synth_separable(8, 8, 0.5, 1).unwrap();
    let cfg = TrainConfig::default();
    let a = to_csv(&sweep(&data, &[(1, 2)], &[1, 2], &cfg), false);
    let b = to_csv(&sweep(&data, &[(1, 2)], &[1, 2], &cfg), false);
    assert_eq!(a, b);
}

#[test]
fn idx_files_train_in_two_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let labels: Vec<u8> = (0..12).map(|i| [3u8, 5, 9][i % 3]).collect();
    let pixels: Vec<Vec<u8>> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            (0..16)
                .map(|p| {
                    let bright = if l == 3 { p < 8 } else { p >= 8 };
                    if bright { 200 + (i + p) as u8 % 50 } else { ((i * p) % 40) as u8 }
                })
                .collect()
        })
        .collect();
    let ip = dir.path().join("images.idx");
    let lp = dir.path().join("labels.idx");
    std::fs::write(&ip, encode_idx_images(4, 4, &pixels)).unwrap();
    std::fs::write(&lp, encode_idx_labels(&labels)).unwrap();

    let data = load_idx(&ip, &lp, (3, 5), 3).unwrap();
    assert_eq!(data.len(), 6);
    assert_eq!(data.shape(), (4, 4));
    assert!(data.inputs.iter().all(|x| x.data.iter().all(|&p| (0.0..=1.0).contains(&p))));

    let padded = augment_pad(&data, 6, 6).unwrap();
    for act in [Activation::Linear, Activation::Relu] {
        let cfg = TrainConfig { kernel: (2, 2), channels: 2, activation: act, ..Default::default() };
        let out = train(&padded, &cfg).unwrap();
        assert!(out.converged, "{act:?}");
        let q = margin_normalize(&out.weights, &padded, act).unwrap();
        assert!((min_margin(&q, &padded, act) - 1.0).abs() <= 1e-6);
    }

    assert!(load_idx(&ip, &lp, (3, 5), 5).is_err());
    assert!(load_idx(&dir.path().join("missing"), &lp, (3, 5), 1).is_err());
}
