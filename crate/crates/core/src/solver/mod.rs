//! Conventional power-control solvers.

mod perfect;
mod robust;

pub use perfect::{closed_form, golden_search, inner_f, power_cap, DEFAULT_SEARCH_TOL};
pub use robust::{
    block_family, build_lmis, certificate_exists, feasible_tau, psd_2x2, solve_robust,
    solve_robust_certified, AffineBlock, CertificateVars, RobustSolution, Sym2x2,
    DEFAULT_BISECTION_TOL, PSD_TOL,
};

use serde::{Deserialize, Serialize};

/// Output of a single power-control solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Optimal transmit power (mW).
    pub p_star: f64,
    /// Achieved secrecy rate (bits/s/Hz).
    pub rate_star: f64,
    /// Outer search variable at the optimum; 0 when no search ran.
    pub t_star: f64,
    pub iterations: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl SolveResult {
    pub(crate) fn zero(wall_time: f64) -> Self {
        Self {
            p_star: 0.0,
            rate_star: 0.0,
            t_star: 0.0,
            iterations: 0,
            wall_time,
        }
    }
}
