//! Dense primal-dual interior-point method for
//!
//! ```text
//! min ⟨I, X⟩  s.t.  ⟨A_i, X⟩ = b_i,  X ⪰ 0
//! max bᵀy     s.t.  S = I - Σ y_i A_i ⪰ 0
//! ```
//!
//! HKM search direction with a Mehrotra predictor-corrector step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tolerance::ToleranceConfig;

#[derive(Debug, Clone)]
pub(crate) struct IpmOutput {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub iterations: usize,
    /// Largest absolute constraint violation.
    pub primal_residual: f64,
    /// Frobenius norm of `I - Σ y_i A_i - S`.
    pub dual_residual: f64,
    /// `⟨X, S⟩ / (1 + |⟨I, X⟩|)`.
    pub rel_gap: f64,
}

struct Iterate {
    x: DMatrix<f64>,
    y: DVector<f64>,
    s: DMatrix<f64>,
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| p * q).sum()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn apply_a(mats: &[DMatrix<f64>], x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(mats.len(), mats.iter().map(|a| inner(a, x)))
}

fn apply_at(mats: &[DMatrix<f64>], y: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    for (a, &yi) in mats.iter().zip(y.iter()) {
        if yi != 0.0 {
            out += a * yi;
        }
    }
    out
}

/// Largest `α` with `X + α dX ⪰ 0`, `f64::INFINITY` when unbounded.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let l = Cholesky::new(x.clone())?.unpack();
    let t = l.solve_lower_triangular(dx)?;
    let t = l.solve_lower_triangular(&t.transpose())?;
    let min = SymmetricEigen::new(sym(&t)).eigenvalues.min();
    Some(if min >= 0.0 { f64::INFINITY } else { -1.0 / min })
}

fn spd_inverse(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(s.clone()).map(|c| c.inverse())
}

enum Factored {
    Chol(Cholesky<f64, Dyn>),
    Lu(nalgebra::LU<f64, Dyn, Dyn>),
}

impl Factored {
    fn new(m: DMatrix<f64>) -> Self {
        match Cholesky::new(m.clone()) {
            Some(c) => Factored::Chol(c),
            None => Factored::Lu(m.lu()),
        }
    }

    fn solve(&self, r: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factored::Chol(c) => Some(c.solve(r)),
            Factored::Lu(l) => l.solve(r),
        }
    }
}

struct Residuals {
    rp: DVector<f64>,
    rd: DMatrix<f64>,
    pinf: f64,
    dinf: f64,
    gap: f64,
    pabs: f64,
}

fn residuals(mats: &[DMatrix<f64>], b: &DVector<f64>, it: &Iterate) -> Residuals {
    let n = it.x.nrows();
    let rp = b - apply_a(mats, &it.x);
    let rd = DMatrix::<f64>::identity(n, n) - &it.s - apply_at(mats, &it.y, n);
    let pobj = it.x.trace();
    let dobj = b.dot(&it.y);
    let pinf = rp.norm() / (1.0 + b.norm());
    let dinf = rd.norm() / (1.0 + (n as f64).sqrt());
    let gap = (pobj - dobj).abs().max(inner(&it.x, &it.s).abs()) / (1.0 + pobj.abs() + dobj.abs());
    let pabs = rp.amax();
    Residuals { rp, rd, pinf, dinf, gap, pabs }
}

/// Solves the standard-form SDP. `mats` must be symmetric `n×n`.
pub(crate) fn solve(
    mats: &[DMatrix<f64>],
    b: &DVector<f64>,
    n: usize,
    tol: &ToleranceConfig,
) -> Result<IpmOutput> {
    let m = mats.len();
    let xi = 1.0 + b.amax() * (n as f64).sqrt();
    let mut it = Iterate {
        x: DMatrix::identity(n, n) * xi,
        y: DVector::zeros(m),
        s: DMatrix::identity(n, n),
    };
    let mut best: Option<(f64, IpmOutput)> = None;
    let target = tol.solver_target;

    for iter in 0..tol.max_iterations {
        let r = residuals(mats, b, &it);
        let merit = r.pinf.max(r.dinf).max(r.gap);
        let snapshot = IpmOutput {
            x: it.x.clone(),
            y: it.y.clone(),
            iterations: iter,
            primal_residual: r.pabs,
            dual_residual: r.rd.norm(),
            rel_gap: r.gap,
        };
        if best.as_ref().is_none_or(|(m0, _)| merit < *m0) {
            best = Some((merit, snapshot));
        }
        if r.pinf <= target && r.dinf <= target && r.gap <= target {
            break;
        }

        let Some(s_inv) = spd_inverse(&it.s) else { break };
        let mu = inner(&it.x, &it.s) / n as f64;

        // Schur complement M_ij = tr(A_i X A_j S⁻¹).
        let xa: Vec<DMatrix<f64>> = mats.iter().map(|a| &it.x * a * &s_inv).collect();
        let mut schur = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in 0..=j {
                let v = inner(&mats[i], &xa[j]);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let fac = Factored::new(schur);
        let x_rd_sinv = &it.x * &r.rd * &s_inv;
        let a_x_rd = apply_a(mats, &x_rd_sinv);

        let direction = |rc: &DMatrix<f64>| -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
            let rhs = &r.rp - apply_a(mats, rc) + &a_x_rd;
            let dy = fac.solve(&rhs)?;
            let ds = &r.rd - apply_at(mats, &dy, n);
            let dx = rc - sym(&(&it.x * &ds * &s_inv));
            Some((dx, dy, ds))
        };

        let Some((dx_a, _, ds_a)) = direction(&(-&it.x)) else { break };
        let (Some(ap), Some(ad)) = (max_step(&it.x, &dx_a), max_step(&it.s, &ds_a)) else {
            break;
        };
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mu_aff = inner(&(&it.x + &dx_a * ap), &(&it.s + &ds_a * ad)) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let rc = &s_inv * (sigma * mu) - &it.x - sym(&(&dx_a * &ds_a * &s_inv));
        let Some((dx, dy, ds)) = direction(&rc) else { break };
        let (Some(ap), Some(ad)) = (max_step(&it.x, &dx), max_step(&it.s, &ds)) else {
            break;
        };
        let gamma = if merit < 1e-6 { 0.995 } else { 0.98 };
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if ap < 1e-14 && ad < 1e-14 {
            break;
        }
        it.x = sym(&(&it.x + dx * ap));
        it.y += dy * ad;
        it.s = sym(&(&it.s + ds * ad));
    }

    let r = residuals(mats, b, &it);
    let merit = r.pinf.max(r.dinf).max(r.gap);
    let (_, out) = match best {
        Some((m0, out)) if m0 < merit => (m0, out),
        _ => (
            merit,
            IpmOutput {
                x: it.x,
                y: it.y,
                iterations: tol.max_iterations,
                primal_residual: r.pabs,
                dual_residual: r.rd.norm(),
                rel_gap: r.gap,
            },
        ),
    };
    if out.primal_residual <= tol.feas && out.rel_gap <= tol.gap && out.dual_residual <= tol.feas
    {
        Ok(out)
    } else {
        Err(Error::SolverNonConvergence {
            iterations: out.iterations,
            primal_residual: out.primal_residual,
            dual_residual: out.dual_residual,
            gap: out.rel_gap,
            best_objective: out.x.trace(),
        })
    }
}
