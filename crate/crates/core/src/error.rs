use thiserror::Error;

use num_complex::Complex64;

/// Errors raised by the regularizer, solver and factorization routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("spectrum is not conjugate symmetric (max violation {violation:.3e})")]
    NonRealSpectrum { violation: f64 },

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("line search failed to bracket a minimum (last alpha {alpha}, objective {objective})")]
    SearchFailure { alpha: f64, objective: f64 },

    #[error(
        "SDP solver stopped after {iterations} iterations without meeting tolerances \
         (primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e}, gap {gap:.3e})"
    )]
    SolverNonConvergence {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
        best_objective: f64,
    },

    #[error("dual certificate rejected: sigma_max = {sigma} exceeds 1 + {tol}")]
    CertificateRejected { sigma: f64, tol: f64 },

    #[error("root pairing failed at cluster tolerance {tol:.1e}: {reason}")]
    RootPairing {
        tol: f64,
        reason: String,
        roots: Vec<Complex64>,
    },

    #[error("input is not a sum of self-convolutions (gain {gamma:.3e})")]
    NotSelfConvolution { gamma: f64 },

    #[error("rank-1 extraction failed at frequency {index}: |u_hat| = {u_hat_abs:.3e}, |w_hat| = {w_hat_abs:.3e}")]
    Extraction {
        index: usize,
        u_hat_abs: f64,
        w_hat_abs: f64,
    },

    #[error("oracle found no feasible point (best residual {best_residual:.3e})")]
    OracleInfeasible { best_residual: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

impl Error {
    /// True for failures that come from numerics rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Dimension(_) | Error::InvalidInput(_) | Error::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
