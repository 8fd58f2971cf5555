//! Nonconvex weight-space minimizer of `‖U‖² + ‖V‖²` subject to `w(U, V) = w`.
//!
//! Each restart runs an augmented-Lagrangian loop over the penalty schedule
//! with L-BFGS inner solves, then restores exact feasibility by replacing `V`
//! with the least-norm second layer for the final kernels, and balances the
//! two layers. Results upper-bound the regularizer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::multichannel::{multi_predictor, realizable, MultiChannelMap, MultiChannelWeights};
use crate::spectral::{convolve, correlate, dft_real, idft_complex, NetworkWeights, SignalVector};

/// Accepted results must satisfy the constraint to this absolute accuracy.
pub const FEASIBILITY: f64 = 1e-6;

/// Optimizer settings. The RNG is ChaCha8 seeded with `seed`; restart `i`
/// uses the stream `seed + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub channels: usize,
    pub restarts: usize,
    /// L-BFGS iteration cap per penalty value.
    pub max_iters: usize,
    pub penalty_schedule: Vec<f64>,
    /// Initial trial step of the line search.
    pub step_size: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            channels: 1,
            restarts: 8,
            max_iters: 2000,
            penalty_schedule: (2..=8).map(|e| 10f64.powi(e)).collect(),
            step_size: 1.0,
            seed: 0,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.restarts == 0 {
            return Err(Error::InvalidInput("channels and restarts must be >= 1".into()));
        }
        if self.penalty_schedule.is_empty()
            || self.penalty_schedule[0] <= 0.0
            || self.penalty_schedule.windows(2).any(|p| p[1] <= p[0])
        {
            return Err(Error::InvalidInput("penalty schedule must be positive and strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<W> {
    pub weights: W,
    pub objective: f64,
    /// Largest absolute entry of `w(U, V) - w`.
    pub constraint_residual: f64,
    pub restart_index: usize,
}

impl<W> OracleResult<W> {
    pub fn feasible(&self) -> bool {
        self.constraint_residual <= FEASIBILITY
    }
}

/// Flat parameter layout `[U_0, ..., U_{R-1}, V]`, each column-major.
#[derive(Debug, Clone, Copy)]
struct Layout {
    d: usize,
    k: usize,
    c: usize,
    r: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.r * self.k * self.c + self.d * self.c
    }

    fn u<'a>(&self, th: &'a [f64], r: usize, c: usize) -> &'a [f64] {
        let o = (r * self.c + c) * self.k;
        &th[o..o + self.k]
    }

    fn v<'a>(&self, th: &'a [f64], c: usize) -> &'a [f64] {
        let o = self.r * self.k * self.c + c * self.d;
        &th[o..o + self.d]
    }

    fn u_off(&self, r: usize, c: usize) -> usize {
        (r * self.c + c) * self.k
    }

    fn v_off(&self, c: usize) -> usize {
        self.r * self.k * self.c + c * self.d
    }

    fn predictor(&self, th: &[f64]) -> Vec<Vec<f64>> {
        (0..self.r)
            .map(|r| {
                let mut w = vec![0.0; self.d];
                for c in 0..self.c {
                    for (a, b) in w.iter_mut().zip(convolve(self.u(th, r, c), self.v(th, c))) {
                        *a += b;
                    }
                }
                w
            })
            .collect()
    }

    fn to_weights(&self, th: &[f64]) -> MultiChannelWeights {
        let u = (0..self.r)
            .map(|r| DMatrix::from_fn(self.k, self.c, |i, c| self.u(th, r, c)[i]))
            .collect();
        let v = DMatrix::from_fn(self.d, self.c, |i, c| self.v(th, c)[i]);
        MultiChannelWeights { u, v }
    }

    fn from_weights(&self, w: &MultiChannelWeights) -> Vec<f64> {
        let mut th = vec![0.0; self.len()];
        for r in 0..self.r {
            for c in 0..self.c {
                for i in 0..self.k {
                    th[self.u_off(r, c) + i] = w.u[r][(i, c)];
                }
            }
        }
        for c in 0..self.c {
            for i in 0..self.d {
                th[self.v_off(c) + i] = w.v[(i, c)];
            }
        }
        th
    }
}

/// `‖θ‖² + ρ ‖e‖² + 2 ⟨μ, e⟩` with `e = w(θ) - target`, and its gradient.
fn augmented(
    lay: &Layout,
    th: &[f64],
    target: &[Vec<f64>],
    mu: &[Vec<f64>],
    rho: f64,
) -> (f64, Vec<f64>) {
    let pred = lay.predictor(th);
    let mut f: f64 = th.iter().map(|x| x * x).sum();
    let mut g: Vec<f64> = th.iter().map(|x| 2.0 * x).collect();
    let mut gw = Vec::with_capacity(lay.r);
    for r in 0..lay.r {
        let e: Vec<f64> = pred[r].iter().zip(&target[r]).map(|(a, b)| a - b).collect();
        f += rho * e.iter().map(|x| x * x).sum::<f64>()
            + 2.0 * e.iter().zip(&mu[r]).map(|(a, b)| a * b).sum::<f64>();
        gw.push(e.iter().zip(&mu[r]).map(|(a, b)| 2.0 * rho * a + 2.0 * b).collect::<Vec<f64>>());
    }
    for c in 0..lay.c {
        let vo = lay.v_off(c);
        for r in 0..lay.r {
            let u = lay.u(th, r, c);
            for (i, x) in correlate(u, &gw[r]).into_iter().enumerate() {
                g[vo + i] += x;
            }
            let gv = correlate(lay.v(th, c), &gw[r]);
            let uo = lay.u_off(r, c);
            for i in 0..lay.k {
                g[uo + i] += gv[i];
            }
        }
    }
    (f, g)
}

/// Penalized objective `‖U‖² + ‖V‖² + ρ ‖w(U, V) - w‖²` of single-channel weights.
pub fn penalized_objective(p: &NetworkWeights, w: &SignalVector, rho: f64) -> f64 {
    let (lay, th, t, mu) = single_setup(p, w);
    augmented(&lay, &th, &t, &mu, rho).0
}

/// Analytic gradient of [`penalized_objective`] as `(∂U, ∂V)`.
pub fn penalized_gradient(p: &NetworkWeights, w: &SignalVector, rho: f64) -> NetworkWeights {
    let (lay, th, t, mu) = single_setup(p, w);
    let g = augmented(&lay, &th, &t, &mu, rho).1;
    let mw = lay.to_weights(&g);
    NetworkWeights { u: mw.u[0].clone(), v: mw.v }
}

fn single_setup(p: &NetworkWeights, w: &SignalVector) -> (Layout, Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let lay = Layout { d: p.d(), k: p.k(), c: p.channels(), r: 1 };
    let th = lay.from_weights(&MultiChannelWeights { u: vec![p.u.clone()], v: p.v.clone() });
    (lay, th, vec![w.values().to_vec()], vec![vec![0.0; p.d()]])
}

/// Limited-memory BFGS with Armijo backtracking.
fn lbfgs<F: Fn(&[f64]) -> (f64, Vec<f64>)>(f: F, x: &mut Vec<f64>, iters: usize, step0: f64) {
    const MEM: usize = 12;
    let (mut fx, mut g) = f(x);
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    for _ in 0..iters {
        let gn = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if gn <= 1e-13 * (1.0 + fx.abs()) {
            break;
        }
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut t = if hist.is_empty() {
            step0 / g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            let (fn_, gn_) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fn_, gn_));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn_)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn_.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if hist.len() == MEM {
                hist.remove(0);
            }
            hist.push((s, y, 1.0 / sy));
        }
        let progress = fx - fn_;
        *x = xn;
        fx = fn_;
        g = gn_;
        if progress <= 1e-16 * (1.0 + fx.abs()) {
            break;
        }
    }
}

/// Least-norm `V` for fixed kernels: per frequency `V̂[d, :] = pinv(Û(d)) Ŵ[d, :]`.
fn restore(lay: &Layout, th: &mut [f64], target: &[Vec<f64>]) {
    let zero = Complex64::new(0.0, 0.0);
    let uh: Vec<Vec<Vec<Complex64>>> = (0..lay.r)
        .map(|r| {
            (0..lay.c)
                .map(|c| {
                    let mut u = vec![0.0; lay.d];
                    u[..lay.k].copy_from_slice(lay.u(th, r, c));
                    dft_real(&u)
                })
                .collect()
        })
        .collect();
    let wh: Vec<Vec<Complex64>> = target.iter().map(|t| dft_real(t)).collect();
    let mut vh = vec![vec![zero; lay.d]; lay.c];
    for f in 0..lay.d {
        let a = DMatrix::from_fn(lay.r, lay.c, |r, c| uh[r][c][f]);
        let b = DVector::from_fn(lay.r, |r, _| wh[r][f]);
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        let Ok(pinv) = a.pseudo_inverse(1e-12 * scale) else { continue };
        let x = pinv * b;
        for c in 0..lay.c {
            vh[c][f] = x[c];
        }
    }
    for (c, spec) in vh.iter().enumerate() {
        let v = idft_complex(spec);
        let o = lay.v_off(c);
        for i in 0..lay.d {
            th[o + i] = v[i].re;
        }
    }
}

/// Rescales `U` by `t` and `V` by `1/t` to minimize the cost.
fn balance(lay: &Layout, th: &mut [f64]) {
    let split = lay.r * lay.k * lay.c;
    let nu: f64 = th[..split].iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv: f64 = th[split..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu > 0.0 && nv > 0.0 {
        let t = (nv / nu).sqrt();
        th[..split].iter_mut().for_each(|x| *x *= t);
        th[split..].iter_mut().for_each(|x| *x /= t);
    }
}

fn residual(lay: &Layout, th: &[f64], target: &[Vec<f64>]) -> f64 {
    lay.predictor(th)
        .iter()
        .zip(target)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

fn run(lay: Layout, target: &[Vec<f64>], cfg: &OracleConfig) -> Result<OracleResult<MultiChannelWeights>> {
    cfg.validate()?;
    let sd = 1.0 / ((lay.k + lay.d) as f64).sqrt();
    let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut best: Option<(Vec<f64>, f64, f64, usize)> = None;
    for restart in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
        let mut th: Vec<f64> = (0..lay.len()).map(|_| normal.sample(&mut rng)).collect();
        let mut mu = vec![vec![0.0; lay.d]; lay.r];
        for &rho in &cfg.penalty_schedule {
            lbfgs(|x| augmented(&lay, x, target, &mu, rho), &mut th, cfg.max_iters, cfg.step_size);
            let pred = lay.predictor(&th);
            for r in 0..lay.r {
                for i in 0..lay.d {
                    mu[r][i] += rho * (pred[r][i] - target[r][i]);
                }
            }
        }
        let mut restored = th.clone();
        restore(&lay, &mut restored, target);
        if residual(&lay, &restored, target) <= residual(&lay, &th, target) {
            th = restored;
        }
        balance(&lay, &mut th);
        let res = residual(&lay, &th, target);
        let obj: f64 = th.iter().map(|x| x * x).sum();
        let better = match &best {
            None => true,
            Some((_, bo, br, _)) => {
                let (f_new, f_old) = (res <= FEASIBILITY, *br <= FEASIBILITY);
                (f_new && (!f_old || obj < *bo)) || (!f_new && !f_old && res < *br)
            }
        };
        if better {
            best = Some((th, obj, res, restart));
        }
    }
    let (th, objective, constraint_residual, restart_index) = best.expect("restarts >= 1");
    Ok(OracleResult { weights: lay.to_weights(&th), objective, constraint_residual, restart_index })
}

/// Best feasible single-channel weights over `cfg.restarts` random starts.
pub fn minimize_weight_norm(
    w: &SignalVector,
    k: usize,
    cfg: &OracleConfig,
) -> Result<OracleResult<NetworkWeights>> {
    let d = w.dim();
    if k == 0 || k > d {
        return Err(Error::Dimension(format!("kernel size {k} must be in 1..={d}")));
    }
    let lay = Layout { d, k, c: cfg.channels, r: 1 };
    let res = run(lay, &[w.values().to_vec()], cfg)?;
    if !res.feasible() {
        return Err(Error::OracleInfeasible { best_residual: res.constraint_residual });
    }
    let MultiChannelWeights { mut u, v } = res.weights;
    Ok(OracleResult {
        weights: NetworkWeights { u: u.remove(0), v },
        objective: res.objective,
        constraint_residual: res.constraint_residual,
        restart_index: res.restart_index,
    })
}

/// Multichannel version. When `K·C < min(R, D)` an infeasible best effort is
/// returned rather than an error; check [`OracleResult::feasible`].
pub fn minimize_weight_norm_multi(
    w: &MultiChannelMap,
    k: usize,
    cfg: &OracleConfig,
) -> Result<OracleResult<MultiChannelWeights>> {
    let (d, r) = (w.d(), w.r());
    if k == 0 || k > d {
        return Err(Error::Dimension(format!("kernel size {k} must be in 1..={d}")));
    }
    let lay = Layout { d, k, c: cfg.channels, r };
    let target: Vec<Vec<f64>> = (0..r).map(|i| w.values().column(i).iter().copied().collect()).collect();
    let res = run(lay, &target, cfg)?;
    debug_assert!((multi_predictor(&res.weights).values() - w.values()).amax() - res.constraint_residual < 1e-9);
    if !res.feasible() && realizable(d, k, cfg.channels, r).necessary_ok {
        return Err(Error::OracleInfeasible { best_residual: res.constraint_residual });
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{r_k1, r_kd};
    use crate::spectral::predictor_from_weights;
    use rand::Rng;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (d, k, c) in [(5, 2, 1), (6, 3, 2), (4, 4, 1)] {
            let p = NetworkWeights::new(
                DMatrix::from_fn(k, c, |_, _| rng.random_range(-1.0..1.0)),
                DMatrix::from_fn(d, c, |_, _| rng.random_range(-1.0..1.0)),
            )
            .unwrap();
            let w = SignalVector::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let rho = 3.0;
            let g = penalized_gradient(&p, &w, rho);
            let h = 1e-5;
            for i in 0..k {
                for j in 0..c {
                    let mut a = p.clone();
                    a.u[(i, j)] += h;
                    let mut b = p.clone();
                    b.u[(i, j)] -= h;
                    let fd = (penalized_objective(&a, &w, rho) - penalized_objective(&b, &w, rho)) / (2.0 * h);
                    assert!((fd - g.u[(i, j)]).abs() <= 1e-5 * fd.abs().max(1.0));
                }
            }
            for i in 0..d {
                for j in 0..c {
                    let mut a = p.clone();
                    a.v[(i, j)] += h;
                    let mut b = p.clone();
                    b.v[(i, j)] -= h;
                    let fd = (penalized_objective(&a, &w, rho) - penalized_objective(&b, &w, rho)) / (2.0 * h);
                    assert!((fd - g.v[(i, j)]).abs() <= 1e-5 * fd.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn small_examples() {
        let cfg = OracleConfig::default();
        let r = minimize_weight_norm(&SignalVector::delta(4), 1, &cfg).unwrap();
        assert!((r.objective - r_k1(&SignalVector::delta(4)).value).abs() < 1e-3);
        let r = minimize_weight_norm(&SignalVector::ones(4), 4, &cfg).unwrap();
        assert!((r.objective - r_kd(&SignalVector::ones(4)).value).abs() < 1e-3);
        let w = predictor_from_weights(&r.weights);
        assert!(w.values().iter().all(|x| (x - 1.0).abs() < 1e-6));
    }

    #[test]
    fn balanced_at_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = SignalVector::new((0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let r = minimize_weight_norm(&w, 3, &OracleConfig::default()).unwrap();
        let (nu, nv) = (r.weights.u.norm(), r.weights.v.norm());
        assert!((nu - nv).abs() <= 0.02 * nu.max(nv));
    }

    #[test]
    fn rejects_bad_schedule() {
        let cfg = OracleConfig { penalty_schedule: vec![10.0, 5.0], ..Default::default() };
        assert!(minimize_weight_norm(&SignalVector::ones(3), 1, &cfg).is_err());
    }
}
