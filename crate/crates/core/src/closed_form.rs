//! Closed-form induced regularizers for kernel sizes 1, 2 and D, two-sided
//! bounds, and tiled (patterned) targets.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sdp::{r_sdp, DualCertificate};
use crate::spectral::{dft, SignalVector};
use crate::tolerance::ToleranceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedK1,
    ClosedK2,
    ClosedKD,
    /// Tiled target with kernel size a multiple of the tile length.
    ClosedPatterned,
    Sdp,
    Oracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedK1 => "closed_k1",
            Method::ClosedK2 => "closed_k2",
            Method::ClosedKD => "closed_kD",
            Method::ClosedPatterned => "closed_patterned",
            Method::Sdp => "sdp",
            Method::Oracle => "oracle",
        }
    }
}

/// A value of the induced regularizer and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerValue {
    pub value: f64,
    pub method: Method,
    pub certificate: Option<DualCertificate>,
}

impl RegularizerValue {
    fn closed(value: f64, method: Method) -> Self {
        Self { value, method, certificate: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    LowerL1,
    LowerScaledL2,
    UpperL2,
    UpperL1,
}

/// Two lower and two upper bounds valid for every kernel size `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    /// `2 ‖ŵ‖₁`
    pub lower_l1: f64,
    /// `2 √(D/K) ‖ŵ‖₂`
    pub lower_scaled_l2: f64,
    /// `2 √D ‖ŵ‖₂`
    pub upper_l2: f64,
    /// `2 √⌈D/K⌉ ‖ŵ‖₁`
    pub upper_l1: f64,
    /// Bounds known to be attained for this input (scaled deltas and constants).
    pub tight: Vec<BoundKind>,
}

impl BoundsReport {
    pub fn lower(&self) -> f64 {
        self.lower_l1.max(self.lower_scaled_l2)
    }

    pub fn upper(&self) -> f64 {
        self.upper_l2.min(self.upper_l1)
    }
}

/// `K = 1`: `2 √D ‖w‖₂`.
pub fn r_k1(w: &SignalVector) -> RegularizerValue {
    let d = w.dim() as f64;
    RegularizerValue::closed(2.0 * d.sqrt() * w.norm(), Method::ClosedK1)
}

/// `K = D`: `2 ‖ŵ‖₁`.
pub fn r_kd(w: &SignalVector) -> RegularizerValue {
    RegularizerValue::closed(2.0 * dft(w).l1(), Method::ClosedKD)
}

/// `K = 2`: `2 √D · sqrt(inf_{α∈(-1,1)} Σ_{ŵ[d]≠0} |ŵ[d]|² / (1 + α cos(2πd/D)))`.
///
/// Each summand is convex in `α`, so the objective is unimodal and a
/// golden-section search on `[-1+ε, 1-ε]` finds the infimum up to the
/// clipping margin `ε`.
pub fn r_k2(w: &SignalVector, tol: &ToleranceConfig) -> Result<RegularizerValue> {
    let d = w.dim();
    if d < 2 {
        return Err(Error::Dimension("kernel size 2 needs D >= 2".into()));
    }
    if w.is_zero() {
        return Ok(RegularizerValue::closed(0.0, Method::ClosedK2));
    }
    let wh = dft(w);
    let max = wh.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let terms: Vec<(f64, f64)> = wh
        .values()
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-14 * max)
        .map(|(i, z)| (z.norm_sqr(), (2.0 * PI * i as f64 / d as f64).cos()))
        .collect();
    let g = |a: f64| terms.iter().map(|&(m, c)| m / (1.0 + a * c)).sum::<f64>();
    let (alpha, value) = minimize_unimodal(g, -1.0 + tol.interval_margin, 1.0 - tol.interval_margin);
    if !value.is_finite() || value < 0.0 {
        return Err(Error::SearchFailure { alpha, objective: value });
    }
    Ok(RegularizerValue::closed(2.0 * (d as f64).sqrt() * value.sqrt(), Method::ClosedK2))
}

/// Golden-section search followed by one parabolic step. Returns `(argmin, min)`.
fn minimize_unimodal<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if b - a <= 1e-15 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi, a, b] {
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    // Parabola through a, mid, b.
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let den = (m - a) * (fm - fb) - (m - b) * (fm - fa);
    if den.abs() > 0.0 {
        let num = (m - a).powi(2) * (fm - fb) - (m - b).powi(2) * (fm - fa);
        let x = (m - 0.5 * num / den).clamp(lo, hi);
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// The four bounds for kernel size `K`.
pub fn bounds(w: &SignalVector, k: usize) -> Result<BoundsReport> {
    let d = w.dim();
    if k == 0 || k > d {
        return Err(Error::Dimension(format!("kernel size {k} must be in 1..={d}")));
    }
    let wh = dft(w);
    let (l1, l2) = (wh.l1(), wh.l2());
    let df = d as f64;
    let mut tight = Vec::new();
    if !w.is_zero() {
        if w.values()[1..].iter().all(|&x| x == 0.0) {
            tight.extend([BoundKind::LowerL1, BoundKind::UpperL2]);
        } else if w.values().iter().all(|&x| x == w.values()[0]) {
            tight.push(BoundKind::LowerScaledL2);
            if d % k == 0 {
                tight.push(BoundKind::UpperL1);
            }
        }
    }
    Ok(BoundsReport {
        lower_l1: 2.0 * l1,
        lower_scaled_l2: 2.0 * (df / k as f64).sqrt() * l2,
        upper_l2: 2.0 * df.sqrt() * l2,
        upper_l1: 2.0 * (d.div_ceil(k) as f64).sqrt() * l1,
        tight,
    })
}

/// Closed form when one exists for `(D, K)`, otherwise the SDP.
pub fn r_best(w: &SignalVector, k: usize, tol: &ToleranceConfig) -> Result<RegularizerValue> {
    let d = w.dim();
    if k == 0 || k > d {
        return Err(Error::Dimension(format!("kernel size {k} must be in 1..={d}")));
    }
    if k == d {
        Ok(r_kd(w))
    } else if k == 1 {
        Ok(r_k1(w))
    } else if k == 2 {
        r_k2(w, tol)
    } else {
        r_sdp(w, k, tol)
    }
}

/// Regularizer of `p` tiled `D / P` times, for kernel sizes `K <= P` or `K = P·T`.
pub fn r_patterned(
    p: &SignalVector,
    d: usize,
    k: usize,
    tol: &ToleranceConfig,
) -> Result<RegularizerValue> {
    let pl = p.dim();
    if d % pl != 0 {
        return Err(Error::Unsupported(format!("pattern length {pl} does not divide D = {d}")));
    }
    if k == 0 || k > d {
        return Err(Error::Dimension(format!("kernel size {k} must be in 1..={d}")));
    }
    let reps = (d / pl) as f64;
    if k <= pl {
        let inner = r_best(p, k, tol)?;
        return Ok(RegularizerValue { value: reps * inner.value, ..inner });
    }
    if k % pl != 0 {
        return Err(Error::Unsupported(format!(
            "kernel size {k} is neither <= nor a multiple of pattern length {pl}"
        )));
    }
    let t = (k / pl) as f64;
    let value = 2.0 * d as f64 / (t.sqrt() * pl as f64) * dft(p).l1();
    Ok(RegularizerValue::closed(value, Method::ClosedPatterned))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sv(v: &[f64]) -> SignalVector {
        SignalVector::new(v.to_vec()).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, d: usize) -> SignalVector {
        sv(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
    }

    #[test]
    fn k1_examples() {
        assert!((r_k1(&SignalVector::delta(4)).value - 4.0).abs() < 1e-15);
        assert!((r_k1(&SignalVector::ones(4)).value - 8.0).abs() < 1e-15);
        assert_eq!(r_k1(&SignalVector::zeros(4)).value, 0.0);
    }

    #[test]
    fn kd_examples() {
        assert!((r_kd(&SignalVector::delta(4)).value - 4.0).abs() < 1e-14);
        assert!((r_kd(&SignalVector::ones(4)).value - 4.0).abs() < 1e-14);
        assert_eq!(r_kd(&SignalVector::zeros(4)).value, 0.0);
    }

    #[test]
    fn k2_examples() {
        let tol = ToleranceConfig::default();
        assert!((r_k2(&SignalVector::delta(4), &tol).unwrap().value - 4.0).abs() < 1e-12);
        let v = r_k2(&SignalVector::ones(4), &tol).unwrap().value;
        assert!((v - 4.0 * 2f64.sqrt()).abs() < 1e-8);
        assert_eq!(r_k2(&SignalVector::zeros(4), &tol).unwrap().value, 0.0);
        assert!(r_k2(&SignalVector::ones(1), &tol).is_err());
    }

    #[test]
    fn sandwich_between_kd_and_k1() {
        let tol = ToleranceConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let d = [4, 8, 16][rng.random_range(0..3)];
            let w = random(&mut rng, d);
            let a = r_kd(&w).value;
            let b = r_k2(&w, &tol).unwrap().value;
            let c = r_k1(&w).value;
            assert!(a <= b + 1e-10 && b <= c + 1e-10);
        }
    }

    #[test]
    fn k2_objective_is_unimodal_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let d = rng.random_range(2..20);
            let wh = dft(&random(&mut rng, d));
            let g = |a: f64| {
                wh.values()
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z.norm_sqr() / (1.0 + a * (2.0 * PI * i as f64 / d as f64).cos()))
                    .sum::<f64>()
            };
            let xs: Vec<f64> = (1..400).map(|i| -1.0 + i as f64 / 200.0).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
            let turns = ys
                .windows(3)
                .filter(|t| t[1] > t[0] + 1e-12 && t[1] > t[2] + 1e-12)
                .count();
            assert_eq!(turns, 0, "interior local maximum found");
        }
    }

    #[test]
    fn bounds_examples() {
        let b = bounds(&SignalVector::ones(4), 2).unwrap();
        assert!((b.lower_scaled_l2 - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(b.tight.contains(&BoundKind::LowerScaledL2));
        let b = bounds(&SignalVector::delta(4), 4).unwrap();
        assert!((b.lower_l1 - 4.0).abs() < 1e-12);
        assert!((b.upper_l2 - 4.0).abs() < 1e-12);
        assert!(b.tight.contains(&BoundKind::LowerL1) && b.tight.contains(&BoundKind::UpperL2));
    }

    #[test]
    fn bounds_are_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let d = rng.random_range(1..20);
            let k = rng.random_range(1..=d);
            let b = bounds(&random(&mut rng, d), k).unwrap();
            assert!(b.lower() <= b.upper() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn patterned_examples() {
        let tol = ToleranceConfig::default();
        let one = sv(&[1.0]);
        let v = r_patterned(&one, 4, 2, &tol).unwrap().value;
        assert!((v - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        let v = r_patterned(&one, 4, 4, &tol).unwrap().value;
        assert!((v - 4.0).abs() < 1e-12);
        assert!(matches!(r_patterned(&sv(&[1.0, 2.0, 3.0]), 8, 2, &tol), Err(Error::Unsupported(_))));
        assert!(matches!(
            r_patterned(&sv(&[1.0, 2.0]), 8, 3, &tol),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn homogeneity_and_triangle() {
        let tol = ToleranceConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let d = rng.random_range(2..12);
            let a = random(&mut rng, d);
            let b = random(&mut rng, d);
            let g = rng.random_range(-3.0..3.0);
            let sum = sv(&a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect::<Vec<_>>());
            let fs: [&dyn Fn(&SignalVector) -> f64; 3] = [
                &|w| r_k1(w).value,
                &|w| r_kd(w).value,
                &|w| r_k2(w, &tol).unwrap().value,
            ];
            for f in fs {
                assert!((f(&a.scaled(g)) - g.abs() * f(&a)).abs() <= 1e-10 * (1.0 + f(&a)));
                assert!(f(&sum) <= f(&a) + f(&b) + 1e-8);
            }
        }
    }
}
