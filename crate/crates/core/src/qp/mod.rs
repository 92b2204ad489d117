//! Dense strictly convex QPs
//!
//! ```text
//!     minimize    1/2 x' H x + f' x
//!     subject to  A x <= b
//! ```
//!
//! and the dual active-set method that solves them.
//!
//! Multiplier sign convention: stationarity is `H x + A' lambda = -f` and
//! `lambda >= 0` at the optimum. Restricted to a working set `W` the KKT
//! system is
//!
//! ```text
//!     [ H    A_W' ] [ x        ]   [ -f  ]
//!     [ A_W  0    ] [ lambda_W ] = [ b_W ]
//! ```
//!
//! Constraint indices are zero-based everywhere in this crate.

mod brute;
mod cost;
mod daqp;
pub mod io;
pub(crate) mod ldl;

pub use brute::{brute_force_solve, BruteForceSolution, MAX_ENUMERATION};
pub use cost::{cost_model, fixed_cost};
pub use daqp::{
    dual_active_set_solve, DualActiveSetSolver, SolveStatus, SolveTrace, SolverConfig, WorkingSet,
    TIE_TOL,
};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("problem data contains non-finite entries")]
    NonFinite,
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("working set rows are linearly dependent")]
    SingularKkt,
    #[error("constraint index {index} out of range for {m} constraints")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("working set contains index {0} twice")]
    DuplicateIndex(usize),
    #[error("enumeration over {count} candidate working sets exceeds the limit")]
    EnumerationTooLarge { count: u128 },
    #[error("no KKT point exists (problem is primal infeasible)")]
    NoKktPoint,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

/// A dense convex QP with `H` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseQP {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl DenseQP {
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self, QpError> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(QpError::DimensionMismatch(format!(
                "H is {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if f.len() != n {
            return Err(QpError::DimensionMismatch(format!(
                "f has length {}, expected {n}",
                f.len()
            )));
        }
        if a.ncols() != n && a.nrows() > 0 {
            return Err(QpError::DimensionMismatch(format!(
                "A has {} columns, expected {n}",
                a.ncols()
            )));
        }
        if b.len() != a.nrows() {
            return Err(QpError::DimensionMismatch(format!(
                "b has length {}, A has {} rows",
                b.len(),
                a.nrows()
            )));
        }
        let a = if a.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            a
        };
        let finite = h.iter().chain(f.iter()).chain(a.iter()).chain(b.iter());
        if !finite.into_iter().all(|v| v.is_finite()) {
            return Err(QpError::NonFinite);
        }
        cholesky(&h)?;
        Ok(Self { h, f, a, b })
    }

    /// Decision dimension.
    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    /// Number of inequality constraints.
    pub fn m(&self) -> usize {
        self.a.nrows()
    }
}

/// Dual data `M M' = A H^-1 A'` and `d = b + A H^-1 f`, together with the
/// Cholesky factor `H = L L'` used to build them.
#[derive(Debug, Clone)]
pub struct DualQP {
    /// `M = A L^-T`, one row per constraint.
    pub m_fac: DMatrix<f64>,
    pub d: DVector<f64>,
    /// Lower-triangular Cholesky factor of `H`.
    pub l: DMatrix<f64>,
    /// `L^-1 f`.
    pub v: DVector<f64>,
}

pub(crate) fn cholesky(h: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, QpError> {
    let sym = (h + h.transpose()) * 0.5;
    if (&sym - h).amax() > 1e-9 * h.amax().max(1.0) {
        return Err(QpError::NotPositiveDefinite);
    }
    Cholesky::new(sym).ok_or(QpError::NotPositiveDefinite)
}

/// Forms the dual problem data.
pub fn to_dual(qp: &DenseQP) -> Result<DualQP, QpError> {
    let l = cholesky(&qp.h)?.l();
    let m_fac = scaled_constraints(&l, &qp.a)?;
    let v = l
        .solve_lower_triangular(&qp.f)
        .ok_or(QpError::NotPositiveDefinite)?;
    let d = &qp.b + &m_fac * &v;
    Ok(DualQP { m_fac, d, l, v })
}

/// `A L^-T` for a lower-triangular `L`.
pub(crate) fn scaled_constraints(
    l: &DMatrix<f64>,
    a: &DMatrix<f64>,
) -> Result<DMatrix<f64>, QpError> {
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, l.nrows()));
    }
    let y = l
        .solve_lower_triangular(&a.transpose())
        .ok_or(QpError::NotPositiveDefinite)?;
    Ok(y.transpose())
}

pub(crate) fn validate_working_set(ws: &[usize], m: usize) -> Result<(), QpError> {
    for (k, &i) in ws.iter().enumerate() {
        if i >= m {
            return Err(QpError::IndexOutOfRange { index: i, m });
        }
        if ws[..k].contains(&i) {
            return Err(QpError::DuplicateIndex(i));
        }
    }
    Ok(())
}

/// Solves the equality-constrained QP on working set `ws`.
///
/// Uses the Schur complement on the Cholesky factor of `H`:
/// `(M_W M_W') lambda_W = -d_W` followed by `x = -L^-T (v + M_W' lambda_W)`.
pub fn solve_kkt(qp: &DenseQP, ws: &[usize]) -> Result<(DVector<f64>, DVector<f64>), QpError> {
    validate_working_set(ws, qp.m())?;
    let dual = to_dual(qp)?;
    let n = qp.n();
    let k = ws.len();
    let mut lambda = DVector::zeros(k);
    let mut u = dual.v.clone();
    if k > 0 {
        let mw = DMatrix::from_fn(k, n, |r, c| dual.m_fac[(ws[r], c)]);
        let gram = &mw * mw.transpose();
        let rhs = DVector::from_fn(k, |r, _| -dual.d[ws[r]]);
        let chol = Cholesky::new(gram.clone()).ok_or(QpError::SingularKkt)?;
        let diag_min = chol
            .l()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let scale = gram.diagonal().amax().max(f64::MIN_POSITIVE);
        if diag_min * diag_min < ldl::PIVOT_TOL * scale {
            return Err(QpError::SingularKkt);
        }
        lambda = chol.solve(&rhs);
        u += mw.transpose() * &lambda;
    }
    let x = -dual
        .l
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or(QpError::NotPositiveDefinite)?;
    Ok((x, lambda))
}

/// KKT predicate at tolerances `(eps_p, eps_d)`:
///
/// - stationarity `|H x + A' lambda + f|_inf <= eps_d`
/// - primal feasibility `max(A x - b) <= eps_p`
/// - dual feasibility `min(lambda) >= -eps_d`
/// - complementarity `max |lambda_i (A_i x - b_i)| <= eps_p (1 + |b|_inf)`
pub fn check_kkt(
    qp: &DenseQP,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    eps_p: f64,
    eps_d: f64,
) -> bool {
    if x.len() != qp.n() || lambda.len() != qp.m() {
        return false;
    }
    let grad = &qp.h * x + qp.a.transpose() * lambda + &qp.f;
    if grad.amax() > eps_d {
        return false;
    }
    if qp.m() == 0 {
        return true;
    }
    let slack = &qp.a * x - &qp.b;
    if slack.max() > eps_p {
        return false;
    }
    if lambda.min() < -eps_d {
        return false;
    }
    let comp = slack.component_mul(lambda).amax();
    comp <= eps_p * (1.0 + qp.b.amax())
}
