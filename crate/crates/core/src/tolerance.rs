/// Numerical tolerances shared across modules.
///
/// Defaults reproduce the contract values: constraint feasibility 1e-7 per
/// constraint, relative duality gap 1e-6, certificate slack 1e-6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    /// Conjugate-symmetry slack for spectra of real signals.
    pub symmetry: f64,
    /// Absolute per-constraint residual accepted from the SDP solver.
    pub feas: f64,
    /// Relative duality gap accepted from the SDP solver.
    pub gap: f64,
    /// Slack on sigma_max <= 1 for dual certificates.
    pub cert: f64,
    /// Target for the interior-point iterations (tighter than `feas`/`gap`).
    pub solver_target: f64,
    /// Iteration cap for the SDP solver.
    pub max_iterations: usize,
    /// Eigenvalues of Z below `rank * lambda_max` are dropped on extraction.
    pub rank: f64,
    /// Smallest |u_hat[d]| that may be divided by during extraction.
    pub div: f64,
    /// Initial root clustering radius for spectral factorization.
    pub cluster: f64,
    /// Number of times the clustering radius is doubled on a pairing failure.
    pub cluster_retries: usize,
    /// Interior margin used when searching the open interval (-1, 1).
    pub interval_margin: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            symmetry: 1e-9,
            feas: 1e-7,
            gap: 1e-6,
            cert: 1e-6,
            solver_target: 1e-10,
            max_iterations: 200,
            rank: 1e-8,
            div: 1e-10,
            cluster: 1e-6,
            cluster_retries: 4,
            interval_margin: 1e-9,
        }
    }
}
