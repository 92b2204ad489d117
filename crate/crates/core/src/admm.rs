//! ADMM for input-constrained linear MPC with cached Riccati recursions.
//!
//! The problem is split as `u = w` with `w` in the input box. Each iteration
//! solves an LQR problem with input weight `R + rho I` and a linear input
//! term (backward pass over cached gains, forward rollout), projects onto
//! the box and updates the scaled dual variable. No matrix is factored or
//! inverted after [`build_admm_cache`].

use crate::condense::MpcStep;
use crate::condense::{CondenseError, OcpSpec};
use crate::qp::SolveStatus;
use crate::Checksum;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error("ADMM baseline supports pure input-box constraints only")]
    UnsupportedConstraints,
    #[error("numerical failure while building the cache: {0}")]
    NumericalFailure(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("theta has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("traces come from different problems ({0} vs {1})")]
    MismatchedProblem(Checksum, Checksum),
    #[error(transparent)]
    Ocp(#[from] CondenseError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmSettings {
    pub rho: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    /// Start from the previous solve's split and dual variables.
    pub warm_start: bool,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 1.0,
            tol_primal: 1e-4,
            tol_dual: 1e-4,
            max_iter: 100,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdmmCache {
    pub settings: AdmmSettings,
    pub checksum: Checksum,
    f: DMatrix<f64>,
    g: DMatrix<f64>,
    horizon: usize,
    lo: DVector<f64>,
    hi: DVector<f64>,
    /// Feedback gains `K_k`.
    k: Vec<DMatrix<f64>>,
    /// `(R + rho I + G' P_{k+1} G)^-1`.
    c1: Vec<DMatrix<f64>>,
    /// `(F - G K_k)'`.
    c2: Vec<DMatrix<f64>>,
    g_t: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmmStatus {
    Converged,
    IterationCapReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmTrace {
    /// `N x nu`, one row per stage.
    pub u_sequence: DMatrix<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: AdmmStatus,
    pub flop_estimate: u64,
    pub ocp_checksum: Checksum,
    /// Split variable and scaled dual, kept for warm starts.
    pub split: DMatrix<f64>,
    pub dual: DMatrix<f64>,
}

impl AdmmCache {
    pub fn nz(&self) -> usize {
        self.f.nrows()
    }

    pub fn nu(&self) -> usize {
        self.g.ncols()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Flops of one iteration (backward pass, rollout, projection, dual
    /// update and residuals).
    pub fn flops_per_iteration(&self) -> u64 {
        let (nz, nu, n) = (self.nz() as u64, self.nu() as u64, self.horizon as u64);
        n * (4 * nz * nz + 8 * nz * nu + 2 * nu * nu + 8 * nu)
    }
}

pub fn build_admm_cache(ocp: &OcpSpec, settings: &AdmmSettings) -> Result<AdmmCache, AdmmError> {
    ocp.validate()?;
    if !(settings.rho > 0.0 && settings.tol_primal > 0.0 && settings.tol_dual > 0.0) {
        return Err(AdmmError::InvalidSettings(
            "rho and tolerances must be positive".into(),
        ));
    }
    if settings.max_iter == 0 {
        return Err(AdmmError::InvalidSettings(
            "max_iter must be at least 1".into(),
        ));
    }
    let (lo, hi) = ocp.input_box().ok_or(AdmmError::UnsupportedConstraints)?;
    let nu = ocp.nu();
    let r_rho = &ocp.r + DMatrix::identity(nu, nu) * settings.rho;
    let mut p_next = ocp.p.clone();
    let n = ocp.horizon;
    let mut k = vec![DMatrix::zeros(0, 0); n];
    let mut c1 = vec![DMatrix::zeros(0, 0); n];
    let mut c2 = vec![DMatrix::zeros(0, 0); n];
    for stage in (0..n).rev() {
        let gtp = ocp.g.transpose() * &p_next;
        let s = &r_rho + &gtp * &ocp.g;
        let inv = s
            .cholesky()
            .ok_or_else(|| {
                AdmmError::NumericalFailure("stage Hessian not positive definite".into())
            })?
            .inverse();
        let kk = &inv * &gtp * &ocp.f;
        let closed = &ocp.f - &ocp.g * &kk;
        let p = &ocp.q + ocp.f.transpose() * &p_next * &closed;
        p_next = (&p + p.transpose()) * 0.5;
        if !p_next.iter().all(|v| v.is_finite()) {
            return Err(AdmmError::NumericalFailure(
                "Riccati recursion overflowed".into(),
            ));
        }
        c2[stage] = closed.transpose();
        c1[stage] = inv;
        k[stage] = kk;
    }
    Ok(AdmmCache {
        settings: settings.clone(),
        checksum: ocp.checksum(),
        f: ocp.f.clone(),
        g: ocp.g.clone(),
        horizon: n,
        lo,
        hi,
        k,
        c1,
        c2,
        g_t: ocp.g.transpose(),
    })
}

/// Cold-started solve from initial state `theta`.
pub fn admm_solve(cache: &AdmmCache, theta: &DVector<f64>) -> Result<AdmmTrace, AdmmError> {
    admm_solve_from(cache, theta, None)
}

/// Solve starting from the split and dual variables of `warm` when given.
pub fn admm_solve_from(
    cache: &AdmmCache,
    theta: &DVector<f64>,
    warm: Option<&AdmmTrace>,
) -> Result<AdmmTrace, AdmmError> {
    let (nz, nu, n) = (cache.nz(), cache.nu(), cache.horizon);
    if theta.len() != nz {
        return Err(AdmmError::DimensionMismatch {
            got: theta.len(),
            expected: nz,
        });
    }
    let rho = cache.settings.rho;
    let (mut w, mut y) = match warm {
        Some(t) if t.split.shape() == (n, nu) => (t.split.clone(), t.dual.clone()),
        _ => (DMatrix::zeros(n, nu), DMatrix::zeros(n, nu)),
    };
    let mut u = DMatrix::zeros(n, nu);
    let mut d = vec![DVector::zeros(nu); n];
    let mut status = AdmmStatus::IterationCapReached;
    let mut iterations = 0;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    for _ in 0..cache.settings.max_iter {
        iterations += 1;
        // Backward pass for the linear terms.
        let mut p = DVector::zeros(nz);
        for k in (0..n).rev() {
            let r = (w.row(k) - y.row(k)).transpose() * (-rho);
            d[k] = &cache.c1[k] * (&cache.g_t * &p + &r);
            p = &cache.c2[k] * &p - cache.k[k].transpose() * &r;
        }
        // Forward rollout.
        let mut x = theta.clone();
        for k in 0..n {
            let uk = -(&cache.k[k] * &x) - &d[k];
            x = &cache.f * &x + &cache.g * &uk;
            u.set_row(k, &uk.transpose());
        }
        // Projection and dual update.
        let w_prev = w.clone();
        for k in 0..n {
            for j in 0..nu {
                w[(k, j)] = (u[(k, j)] + y[(k, j)]).clamp(cache.lo[j], cache.hi[j]);
            }
        }
        y += &u - &w;
        primal = (&u - &w).amax();
        dual = rho * (&w - &w_prev).amax();
        if primal <= cache.settings.tol_primal && dual <= cache.settings.tol_dual {
            status = AdmmStatus::Converged;
            break;
        }
    }
    Ok(AdmmTrace {
        u_sequence: u,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        status,
        flop_estimate: iterations as u64 * cache.flops_per_iteration(),
        ocp_checksum: cache.checksum,
        split: w,
        dual: y,
    })
}

/// The parts of a solve that the comparison looks at.
pub trait TraceSummary {
    fn flops(&self) -> u64;
    fn iterations(&self) -> usize;
    fn first_input(&self) -> DVector<f64>;
    fn converged(&self) -> bool;
    fn ocp_checksum(&self) -> Checksum;
}

impl TraceSummary for MpcStep {
    fn flops(&self) -> u64 {
        self.trace.flop_estimate
    }
    fn iterations(&self) -> usize {
        self.trace.iterations
    }
    fn first_input(&self) -> DVector<f64> {
        self.u0.clone()
    }
    fn converged(&self) -> bool {
        self.trace.status == SolveStatus::Optimal
    }
    fn ocp_checksum(&self) -> Checksum {
        self.ocp_checksum
    }
}

impl TraceSummary for AdmmTrace {
    fn flops(&self) -> u64 {
        self.flop_estimate
    }
    fn iterations(&self) -> usize {
        self.iterations
    }
    fn first_input(&self) -> DVector<f64> {
        self.u_sequence.row(0).transpose()
    }
    fn converged(&self) -> bool {
        self.status == AdmmStatus::Converged
    }
    fn ocp_checksum(&self) -> Checksum {
        self.ocp_checksum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceDiff {
    /// `flops(b) - flops(a)`.
    pub flop_diff: i64,
    /// `iterations(b) - iterations(a)`.
    pub iter_diff: i64,
    /// `|u0(a) - u0(b)|_inf`.
    pub u0_diff: f64,
}

pub fn compare_traces(
    a: &impl TraceSummary,
    b: &impl TraceSummary,
) -> Result<TraceDiff, AdmmError> {
    if a.ocp_checksum() != b.ocp_checksum() {
        return Err(AdmmError::MismatchedProblem(
            a.ocp_checksum(),
            b.ocp_checksum(),
        ));
    }
    Ok(TraceDiff {
        flop_diff: b.flops() as i64 - a.flops() as i64,
        iter_diff: b.iterations() as i64 - a.iterations() as i64,
        u0_diff: (a.first_input() - b.first_input()).amax(),
    })
}
