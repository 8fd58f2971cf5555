use convreg_core::closed_form::r_best;
use convreg_core::multichannel::{
    kd_dual_certificate, kd_weight_construction, multi_predictor, r_multi_kd, MultiChannelMap,
};
use convreg_core::oracle::{minimize_weight_norm, OracleConfig};
use convreg_core::rank1::extract_rank1_weights;
use convreg_core::sdp::{build_sdp, solve_sdp};
use convreg_core::spectral::{predictor_from_weights, SignalVector};
use convreg_core::{Error, ToleranceConfig};
use nalgebra::DMatrix;

#[test]
fn sdp_extraction_and_oracle_agree() {
    let tol = ToleranceConfig::default();
    let w = SignalVector::new(vec![0.3, -1.2, 0.7, 2.0, 0.1, -0.5, 0.9]).unwrap();
    for k in 1..=7 {
        let s = solve_sdp(&build_sdp(&w, k).unwrap(), &tol).unwrap();
        let p = extract_rank1_weights(&s, &w, k, &tol).unwrap();
        let pred = predictor_from_weights(&p);
        assert!(pred.values().iter().zip(w.values()).all(|(a, b)| (a - b).abs() < 1e-9));
        assert!((p.cost() - s.objective).abs() < 1e-6 * s.objective);
        let o = minimize_weight_norm(&w, k, &OracleConfig { seed: k as u64, ..Default::default() }).unwrap();
        assert!(o.objective >= s.certificate.objective * (1.0 - 1e-12));
        assert!(o.objective <= s.objective * (1.0 + 5e-3));
        let best = r_best(&w, k, &tol).unwrap();
        assert!((best.value - s.objective).abs() < 1e-5 * s.objective);
    }
}

#[test]
fn triplet_dump_reproduces_constraints() {
    let w = SignalVector::new(vec![1.0, 2.0, -1.0, 0.5]).unwrap();
    let p = build_sdp(&w, 2).unwrap();
    let mut buf = Vec::new();
    p.write_triplets(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let head: Vec<usize> = lines.next().unwrap().split(' ').map(|x| x.parse().unwrap()).collect();
    assert_eq!(head, vec![4, 2, 1, 6, 4]);
    // Rebuild every constraint and evaluate it at a known feasible Z.
    let s = solve_sdp(&p, &ToleranceConfig::default()).unwrap();
    for _ in 0..head[4] {
        let hdr: Vec<&str> = lines.next().unwrap().split(' ').collect();
        let rhs: f64 = hdr[2].parse().unwrap();
        let nnz: usize = hdr[3].parse().unwrap();
        let mut val = 0.0;
        for _ in 0..nnz {
            let t: Vec<&str> = lines.next().unwrap().split(' ').collect();
            let (r, c, a): (usize, usize, f64) = (t[0].parse().unwrap(), t[1].parse().unwrap(), t[2].parse().unwrap());
            val += if r == c { a * s.z[(r, c)] } else { 2.0 * a * s.z[(r, c)] };
        }
        assert!((val - rhs).abs() < 1e-7 * (1.0 + rhs.abs()));
    }
    assert!(lines.next().is_none());
}

#[test]
fn full_kernel_multichannel_construction_is_certified() {
    let m = MultiChannelMap::new(DMatrix::from_row_slice(
        5,
        2,
        &[1.0, 0.0, -0.5, 2.0, 0.3, 0.3, 0.0, -1.0, 1.5, 0.2],
    ))
    .unwrap();
    let p = kd_weight_construction(&m);
    let cert = kd_dual_certificate(&m);
    let v = r_multi_kd(&m).value;
    assert!((multi_predictor(&p).values() - m.values()).amax() < 1e-12);
    assert!((p.cost() - v).abs() < 1e-10 * v);
    assert!(cert.feasibility_sigma <= 1.0 + 1e-9);
    assert!((cert.objective - v).abs() < 1e-9 * v);
}

#[test]
fn invalid_inputs_are_not_numerical_failures() {
    let w = SignalVector::ones(4);
    let e = r_best(&w, 5, &ToleranceConfig::default()).unwrap_err();
    assert!(matches!(e, Error::Dimension(_)));
    assert!(!e.is_numerical());
    let tight = ToleranceConfig { max_iterations: 2, ..Default::default() };
    let e = solve_sdp(&build_sdp(&SignalVector::new(vec![1.0, -2.0, 0.5, 0.7, 3.0]).unwrap(), 3).unwrap(), &tight)
        .unwrap_err();
    assert!(e.is_numerical(), "{e}");
}
