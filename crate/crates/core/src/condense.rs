//! Linear MPC problems and their condensed parametric QPs.
//!
//! The optimal control problem is
//!
//! ```text
//!     minimize    sum_{k<N} (z_k' Q z_k + u_k' R u_k) + z_N' P z_N
//!     subject to  z_{k+1} = F z_k + G u_k,   z_0 = theta
//!                 A_z z_k + A_u u_k <= b_u,  k = 0..N-1
//!                 A_f z_N <= b_f             (optional)
//! ```
//!
//! Eliminating the states with `Z = Phi theta + Gamma U` gives a QP in the
//! stacked inputs `U` with `H = Gamma' Qb Gamma + Rb` and
//! `f(theta) = Gamma' Qb Phi theta`, where `Qb = blkdiag(Q, .., Q, P)`.

use crate::checksum::Hasher;
use crate::qp::{DenseQP, DualActiveSetSolver, QpError, SolveTrace, SolverConfig};
use crate::Checksum;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CondenseError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} is not symmetric positive (semi)definite")]
    NotDefinite(&'static str),
    #[error("model data contains non-finite entries")]
    NonFinite,
    #[error("Riccati iteration did not converge (is (F, G) stabilizable?)")]
    NoConvergence,
    #[error(transparent)]
    Qp(#[from] QpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSpec {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub horizon: usize,
    pub a_z: DMatrix<f64>,
    pub a_u: DMatrix<f64>,
    pub b_u: DVector<f64>,
    pub terminal: Option<(DMatrix<f64>, DVector<f64>)>,
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= 1e-9 * m.amax().max(1.0)
}

fn is_psd(m: &DMatrix<f64>) -> bool {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    eig.iter().all(|&e| e >= -1e-10 * m.amax().max(1.0))
}

impl OcpSpec {
    /// Validated constructor. Use [`riccati_terminal`] for the usual
    /// infinite-horizon terminal weight.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        f: DMatrix<f64>,
        g: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        p: DMatrix<f64>,
        horizon: usize,
        a_z: DMatrix<f64>,
        a_u: DMatrix<f64>,
        b_u: DVector<f64>,
        terminal: Option<(DMatrix<f64>, DVector<f64>)>,
    ) -> Result<Self, CondenseError> {
        let spec = Self {
            f,
            g,
            q,
            r,
            p,
            horizon,
            a_z,
            a_u,
            b_u,
            terminal,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn nz(&self) -> usize {
        self.f.nrows()
    }

    pub fn nu(&self) -> usize {
        self.g.ncols()
    }

    pub fn validate(&self) -> Result<(), CondenseError> {
        let nz = self.nz();
        let nu = self.nu();
        let dim = |what: &str| Err(CondenseError::DimensionMismatch(what.to_string()));
        if !self.f.is_square() || self.g.nrows() != nz {
            return dim("F must be nz x nz and G nz x nu");
        }
        if self.q.shape() != (nz, nz) || self.p.shape() != (nz, nz) || self.r.shape() != (nu, nu) {
            return dim("weights do not match the model");
        }
        let nc = self.b_u.len();
        if self.a_z.shape() != (nc, nz) || self.a_u.shape() != (nc, nu) {
            return dim("constraint matrices do not match b_u");
        }
        if let Some((af, bf)) = &self.terminal {
            if af.ncols() != nz || af.nrows() != bf.len() {
                return dim("terminal set does not match the model");
            }
        }
        if self.horizon == 0 {
            return dim("horizon must be at least 1");
        }
        let mut all = self
            .f
            .iter()
            .chain(self.g.iter())
            .chain(self.q.iter())
            .chain(self.r.iter())
            .chain(self.p.iter())
            .chain(self.a_z.iter())
            .chain(self.a_u.iter())
            .chain(self.b_u.iter());
        if !all.all(|v| v.is_finite()) {
            return Err(CondenseError::NonFinite);
        }
        if !is_symmetric(&self.q) || !is_psd(&self.q) {
            return Err(CondenseError::NotDefinite("Q"));
        }
        if !is_symmetric(&self.p) || !is_psd(&self.p) {
            return Err(CondenseError::NotDefinite("P"));
        }
        if !is_symmetric(&self.r) || self.r.clone().cholesky().is_none() {
            return Err(CondenseError::NotDefinite("R"));
        }
        Ok(())
    }

    /// Returns per-input bounds `lo <= u <= hi` when the stage constraints
    /// are a pure input box (no state rows, each row `+-e_j`).
    pub fn input_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        if self.terminal.is_some() || self.a_z.amax() != 0.0 {
            return None;
        }
        let nu = self.nu();
        let mut lo = DVector::from_element(nu, f64::NEG_INFINITY);
        let mut hi = DVector::from_element(nu, f64::INFINITY);
        for i in 0..self.b_u.len() {
            let row = self.a_u.row(i);
            let nz: Vec<usize> = (0..nu).filter(|&j| row[j] != 0.0).collect();
            if nz.len() != 1 {
                return None;
            }
            let j = nz[0];
            let s = row[j];
            if s > 0.0 {
                hi[j] = hi[j].min(self.b_u[i] / s);
            } else {
                lo[j] = lo[j].max(self.b_u[i] / s);
            }
        }
        Some((lo, hi))
    }

    pub fn checksum(&self) -> Checksum {
        let mut h = Hasher::new();
        h.tag("ocp")
            .matrix(&self.f)
            .matrix(&self.g)
            .matrix(&self.q)
            .matrix(&self.r)
            .matrix(&self.p)
            .count(self.horizon)
            .matrix(&self.a_z)
            .matrix(&self.a_u)
            .vector(&self.b_u);
        if let Some((af, bf)) = &self.terminal {
            h.tag("terminal").matrix(af).vector(bf);
        }
        h.finish()
    }
}

/// One Riccati map `Q + F'PF - F'PG (R + G'PG)^-1 G'PF`.
pub fn riccati_map(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let gtp = g.transpose() * p;
    let s = r + &gtp * g;
    let k = s.cholesky()?.solve(&(&gtp * f));
    let next = q + f.transpose() * p * f - f.transpose() * p * g * k;
    Some((&next + next.transpose()) * 0.5)
}

/// Infinite-horizon LQR gain `K = (R + G'PG)^-1 G'PF` (control `u = -K z`).
pub fn lqr_gain(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>, CondenseError> {
    let gtp = g.transpose() * p;
    let s = r + &gtp * g;
    let chol = s.cholesky().ok_or(CondenseError::NotDefinite("R + G'PG"))?;
    Ok(chol.solve(&(gtp * f)))
}

/// Stabilizing solution of the discrete algebraic Riccati equation.
///
/// Uses the structure-preserving doubling iteration, then polishes with a
/// few plain Riccati steps and checks the fixed-point residual.
pub fn riccati_terminal(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, CondenseError> {
    let n = f.nrows();
    if !f.is_square()
        || g.nrows() != n
        || q.shape() != (n, n)
        || r.shape() != (g.ncols(), g.ncols())
    {
        return Err(CondenseError::DimensionMismatch("Riccati data".into()));
    }
    let r_chol = r
        .clone()
        .cholesky()
        .ok_or(CondenseError::NotDefinite("R"))?;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut a = f.clone();
    let mut gg = g * r_chol.solve(&g.transpose());
    let mut h = q.clone();
    let mut converged = false;
    for _ in 0..200 {
        let w = &eye + &gg * &h;
        let lu = w.lu();
        let wa = lu.solve(&a).ok_or(CondenseError::NoConvergence)?;
        let wg = lu.solve(&gg).ok_or(CondenseError::NoConvergence)?;
        let h_next = &h + a.transpose() * &h * &wa;
        let g_next = &gg + &a * &wg * a.transpose();
        let a_next = &a * &wa;
        if !h_next.iter().all(|v| v.is_finite()) {
            return Err(CondenseError::NoConvergence);
        }
        let delta = (&h_next - &h).amax();
        h = (&h_next + h_next.transpose()) * 0.5;
        gg = (&g_next + g_next.transpose()) * 0.5;
        a = a_next;
        if delta <= 1e-14 * h.amax().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CondenseError::NoConvergence);
    }
    let mut p = h;
    for _ in 0..5 {
        p = riccati_map(f, g, q, r, &p).ok_or(CondenseError::NoConvergence)?;
    }
    let res = (riccati_map(f, g, q, r, &p).ok_or(CondenseError::NoConvergence)? - &p).amax();
    if !(res <= 1e-9 * p.amax().max(1.0)) {
        return Err(CondenseError::NoConvergence);
    }
    Ok(p)
}

/// QP family with `f(theta) = f_bar + F_theta theta` and
/// `b(theta) = b_bar + W_theta theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricQP {
    pub h: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub f_bar: DVector<f64>,
    pub f_theta: DMatrix<f64>,
    pub b_bar: DVector<f64>,
    pub w_theta: DMatrix<f64>,
    /// Inputs per stage; the applied control is the first `nu` entries.
    pub nu: usize,
}

impl ParametricQP {
    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn theta_dim(&self) -> usize {
        self.f_theta.ncols()
    }

    pub fn f_at(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.f_bar + &self.f_theta * theta
    }

    pub fn b_at(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.b_bar + &self.w_theta * theta
    }

    pub fn instantiate(&self, theta: &DVector<f64>) -> Result<DenseQP, QpError> {
        DenseQP::new(
            self.h.clone(),
            self.f_at(theta),
            self.a.clone(),
            self.b_at(theta),
        )
    }

    /// Restricts the parameter to coordinates `dims`, holding the others at
    /// the values in `fixed` (a full-length parameter vector).
    pub fn slice(&self, dims: &[usize], fixed: &DVector<f64>) -> Result<Self, QpError> {
        let d = self.theta_dim();
        if fixed.len() != d || dims.iter().any(|&k| k >= d) {
            return Err(QpError::DimensionMismatch("slice dimensions".into()));
        }
        let mut base = fixed.clone();
        for &k in dims {
            base[k] = 0.0;
        }
        Ok(Self {
            h: self.h.clone(),
            a: self.a.clone(),
            f_bar: self.f_at(&base),
            f_theta: self.f_theta.select_columns(dims),
            b_bar: self.b_at(&base),
            w_theta: self.w_theta.select_columns(dims),
            nu: self.nu,
        })
    }

    pub fn checksum(&self) -> Checksum {
        Hasher::new()
            .tag("pqp")
            .matrix(&self.h)
            .matrix(&self.a)
            .vector(&self.f_bar)
            .matrix(&self.f_theta)
            .vector(&self.b_bar)
            .matrix(&self.w_theta)
            .count(self.nu)
            .finish()
    }
}

/// Condenses `ocp` into a [`ParametricQP`] over `theta = z_0`.
///
/// Constraint rows with an all-zero input part are dropped (they only
/// constrain `theta`).
pub fn condense(ocp: &OcpSpec) -> Result<ParametricQP, CondenseError> {
    ocp.validate()?;
    let (nz, nu, n_h) = (ocp.nz(), ocp.nu(), ocp.horizon);
    let n = n_h * nu;

    // Prediction matrices for z_1..z_N.
    let mut phi = DMatrix::zeros(n_h * nz, nz);
    let mut gamma = DMatrix::zeros(n_h * nz, n);
    let mut fpow = DMatrix::<f64>::identity(nz, nz);
    for k in 0..n_h {
        fpow = &ocp.f * fpow;
        phi.view_mut((k * nz, 0), (nz, nz)).copy_from(&fpow);
        for j in 0..=k {
            // z_{k+1} depends on u_j through F^{k-j} G.
            let blk = if j == k {
                ocp.g.clone()
            } else {
                let prev = gamma.view((k * nz - nz, j * nu), (nz, nu)).into_owned();
                &ocp.f * prev
            };
            gamma.view_mut((k * nz, j * nu), (nz, nu)).copy_from(&blk);
        }
    }

    let mut qb = DMatrix::zeros(n_h * nz, n_h * nz);
    for k in 0..n_h {
        let w = if k + 1 == n_h { &ocp.p } else { &ocp.q };
        qb.view_mut((k * nz, k * nz), (nz, nz)).copy_from(w);
    }
    let mut rb = DMatrix::zeros(n, n);
    for k in 0..n_h {
        rb.view_mut((k * nu, k * nu), (nu, nu)).copy_from(&ocp.r);
    }
    let gtq = gamma.transpose() * &qb;
    let h = &gtq * &gamma + rb;
    let h = (&h + h.transpose()) * 0.5;
    let f_theta = &gtq * &phi;

    // Constraint rows: A_U U <= b_bar + W theta.
    let mut rows_a: Vec<DVector<f64>> = Vec::new();
    let mut rows_b: Vec<f64> = Vec::new();
    let mut rows_w: Vec<DVector<f64>> = Vec::new();
    let nc = ocp.b_u.len();
    let mut push = |a: DVector<f64>, b: f64, w: DVector<f64>| {
        if a.amax() > 0.0 {
            rows_a.push(a);
            rows_b.push(b);
            rows_w.push(w);
        }
    };
    for k in 0..n_h {
        for i in 0..nc {
            let az = ocp.a_z.row(i).transpose();
            let mut a = DVector::zeros(n);
            for c in 0..nu {
                a[k * nu + c] = ocp.a_u[(i, c)];
            }
            let w = if k == 0 {
                -az.clone()
            } else {
                let gk = gamma.rows((k - 1) * nz, nz);
                a += gk.transpose() * &az;
                -(phi.rows((k - 1) * nz, nz).transpose() * &az)
            };
            push(a, ocp.b_u[i], w);
        }
    }
    if let Some((af, bf)) = &ocp.terminal {
        let gn = gamma.rows((n_h - 1) * nz, nz);
        let pn = phi.rows((n_h - 1) * nz, nz);
        for i in 0..bf.len() {
            let afi = af.row(i).transpose();
            push(gn.transpose() * &afi, bf[i], -(pn.transpose() * &afi));
        }
    }
    let m = rows_b.len();
    let a = DMatrix::from_fn(m, n, |r, c| rows_a[r][c]);
    let w_theta = DMatrix::from_fn(m, nz, |r, c| rows_w[r][c]);
    let pqp = ParametricQP {
        h,
        a,
        f_bar: DVector::zeros(n),
        f_theta,
        b_bar: DVector::from_vec(rows_b),
        w_theta,
        nu,
    };
    // Validates H.
    pqp.instantiate(&DVector::zeros(nz))?;
    Ok(pqp)
}

/// First input and the full solver trace of one receding-horizon step.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcStep {
    pub u0: DVector<f64>,
    pub trace: SolveTrace,
    pub ocp_checksum: Checksum,
}

/// A parametric QP with its `theta`-independent factorization cached for
/// repeated receding-horizon solves.
#[derive(Debug, Clone)]
pub struct MpcController {
    pqp: ParametricQP,
    solver: DualActiveSetSolver,
    checksum: Checksum,
}

impl MpcController {
    pub fn new(pqp: ParametricQP) -> Result<Self, QpError> {
        let solver = DualActiveSetSolver::new(&pqp.h, &pqp.a)?;
        let checksum = pqp.checksum();
        Ok(Self {
            pqp,
            solver,
            checksum,
        })
    }

    /// Condenses `ocp` and tags every step with the OCP checksum.
    pub fn from_ocp(ocp: &OcpSpec) -> Result<Self, CondenseError> {
        Ok(Self::new(condense(ocp)?)?.with_checksum(ocp.checksum()))
    }

    /// Tags results with an OCP checksum instead of the QP checksum, so
    /// they can be compared with other solvers built from the same OCP.
    pub fn with_checksum(mut self, checksum: Checksum) -> Self {
        self.checksum = checksum;
        self
    }

    pub fn pqp(&self) -> &ParametricQP {
        &self.pqp
    }

    pub fn step(&self, theta: &DVector<f64>, cfg: &SolverConfig) -> Result<MpcStep, QpError> {
        if theta.len() != self.pqp.theta_dim() {
            return Err(QpError::DimensionMismatch(format!(
                "theta has length {}, expected {}",
                theta.len(),
                self.pqp.theta_dim()
            )));
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(QpError::NonFinite);
        }
        cfg.validate(self.pqp.m())?;
        let trace = self
            .solver
            .solve(&self.pqp.f_at(theta), &self.pqp.b_at(theta), cfg);
        let u0 = trace.x_star.rows(0, self.pqp.nu).into_owned();
        Ok(MpcStep {
            u0,
            trace,
            ocp_checksum: self.checksum,
        })
    }
}

/// Solves one MPC step from scratch.
pub fn mpc_step(
    pqp: &ParametricQP,
    theta: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<MpcStep, QpError> {
    MpcController::new(pqp.clone())?.step(theta, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_riccati_values() {
        let p = riccati_terminal(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-12);
        let p = riccati_terminal(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_relative_eq!(p[(0, 0)], (1.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn riccati_fails_for_unstabilizable_pair() {
        let r = riccati_terminal(&scalar(2.0), &scalar(0.0), &scalar(1.0), &scalar(1.0));
        assert!(matches!(r, Err(CondenseError::NoConvergence)));
    }

    #[test]
    fn one_step_condensing() {
        let f = dmatrix![1.0, 0.1; 0.0, 1.0];
        let g = dmatrix![0.005; 0.1];
        let p = dmatrix![3.0, 0.5; 0.5, 2.0];
        let r = scalar(0.7);
        let ocp = OcpSpec::new(
            f.clone(),
            g.clone(),
            DMatrix::identity(2, 2),
            r.clone(),
            p.clone(),
            1,
            DMatrix::zeros(2, 2),
            dmatrix![1.0; -1.0],
            dvector![1.0, 1.0],
            None,
        )
        .unwrap();
        let pqp = condense(&ocp).unwrap();
        assert_relative_eq!(pqp.h, &r + g.transpose() * &p * &g, epsilon = 1e-14);
        assert_relative_eq!(pqp.f_theta, g.transpose() * &p * &f, epsilon = 1e-14);
        assert_eq!(pqp.w_theta.amax(), 0.0);
        assert_eq!(pqp.b_bar, dvector![1.0, 1.0]);
    }

    #[test]
    fn state_constraints_enter_through_theta() {
        let ocp = OcpSpec::new(
            dmatrix![1.0, 0.1; 0.0, 1.0],
            dmatrix![0.005; 0.1],
            DMatrix::identity(2, 2),
            scalar(1.0),
            DMatrix::identity(2, 2),
            3,
            dmatrix![0.0, 1.0],
            dmatrix![0.0],
            dvector![2.0],
            None,
        )
        .unwrap();
        let pqp = condense(&ocp).unwrap();
        // The k = 0 row involves no input and is dropped.
        assert_eq!(pqp.m(), 2);
        let theta = dvector![0.3, -0.4];
        let qp = pqp.instantiate(&theta).unwrap();
        // Check the k = 1 row against a direct simulation.
        let u = dvector![0.2, -0.1, 0.05];
        let z1 = &ocp.f * &theta + &ocp.g * u[0];
        let lhs = qp.a.row(0).dot(&u.transpose()) - qp.b[0];
        assert_relative_eq!(lhs, z1[1] - 2.0, epsilon = 1e-14);
    }

    #[test]
    fn input_box_detection() {
        let ocp = OcpSpec::new(
            scalar(1.0),
            dmatrix![1.0, 0.0],
            scalar(1.0),
            DMatrix::identity(2, 2),
            scalar(1.0),
            2,
            DMatrix::zeros(3, 1),
            dmatrix![1.0, 0.0; -2.0, 0.0; 0.0, 1.0],
            dvector![1.0, 1.0, 0.5],
            None,
        )
        .unwrap();
        let (lo, hi) = ocp.input_box().unwrap();
        assert_eq!(lo, dvector![-0.5, f64::NEG_INFINITY]);
        assert_eq!(hi, dvector![1.0, 0.5]);
    }

    #[test]
    fn rejects_bad_weights() {
        let r = OcpSpec::new(
            scalar(1.0),
            scalar(1.0),
            scalar(-1.0),
            scalar(1.0),
            scalar(1.0),
            1,
            DMatrix::zeros(0, 1),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            None,
        );
        assert!(matches!(r, Err(CondenseError::NotDefinite("Q"))));
    }
}
