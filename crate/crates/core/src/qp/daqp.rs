use super::ldl::{blocking_positions, LdlFactor};
use super::{cholesky, scaled_constraints, validate_working_set, DenseQP, QpError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Ties between candidate indices closer than this are broken towards the
/// lowest constraint index.
pub const TIE_TOL: f64 = 1e-12;

/// Ordered list of distinct constraint indices (insertion order kept).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkingSet(pub Vec<usize>);

impl WorkingSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.iter().position(|&k| k == i)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Same indices regardless of order.
    pub fn same_members(&self, other: &WorkingSet) -> bool {
        let mut a = self.0.clone();
        let mut b = other.0.clone();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }
}

impl From<Vec<usize>> for WorkingSet {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub initial_ws: WorkingSet,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_primal: 1e-4,
            eps_dual: 1e-4,
            max_iter: 100,
            initial_ws: WorkingSet::empty(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, m: usize) -> Result<(), QpError> {
        if !(self.eps_primal > 0.0 && self.eps_dual > 0.0) {
            return Err(QpError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(QpError::InvalidConfig("max_iter must be at least 1".into()));
        }
        validate_working_set(self.initial_ws.as_slice(), m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    IterationCapReached,
    InfeasibleDetected,
    NumericalFailure,
}

/// Result of one solve, including every working set visited.
///
/// `iterations` counts working-set changes, so `ws_sequence` holds
/// `iterations + 1` entries starting with the initial working set and ending
/// with the final one (the optimal active set on success).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub x_star: DVector<f64>,
    pub lambda_star: DVector<f64>,
    pub active_set: WorkingSet,
    pub ws_sequence: Vec<WorkingSet>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub flop_estimate: u64,
}

/// Dual active-set solver with the `theta`-independent data of a QP family
/// (`H` and `A` fixed, `f` and `b` varying) factored once.
#[derive(Debug, Clone)]
pub struct DualActiveSetSolver {
    l: DMatrix<f64>,
    m_fac: DMatrix<f64>,
}

impl DualActiveSetSolver {
    pub fn new(h: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Self, QpError> {
        let l = cholesky(h)?.l();
        let m_fac = scaled_constraints(&l, a)?;
        Ok(Self { l, m_fac })
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn m(&self) -> usize {
        self.m_fac.nrows()
    }

    pub fn m_fac(&self) -> &DMatrix<f64> {
        &self.m_fac
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Dual offset `d = b + M L^-1 f` and `v = L^-1 f`.
    pub fn dual_offset(&self, f: &DVector<f64>, b: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let v = self
            .l
            .solve_lower_triangular(f)
            .expect("Cholesky factor has a positive diagonal");
        let d = b + &self.m_fac * &v;
        (d, v)
    }

    /// Runs the dual active-set method for linear cost `f` and offsets `b`.
    ///
    /// Each iteration either
    ///
    /// - steps along the null space of `M_W'` when the last added row made
    ///   the working set dependent, removing the blocking index (or reporting
    ///   infeasibility when nothing blocks),
    /// - takes the full step to the equality-constrained dual optimum
    ///   `lambda*` when it is dual feasible and adds the most violated primal
    ///   constraint, or
    /// - takes the partial step towards `lambda*` permitted by `lambda >= 0`
    ///   and removes the blocking index (minimum-ratio rule).
    pub fn solve(&self, f: &DVector<f64>, b: &DVector<f64>, cfg: &SolverConfig) -> SolveTrace {
        let n = self.n();
        let m = self.m();
        let (d, v) = self.dual_offset(f, b);

        let mut ws: Vec<usize> = cfg.initial_ws.0.clone();
        let mut lambda = DVector::<f64>::zeros(m);
        let mut seq = vec![WorkingSet(ws.clone())];
        let mut iter = 0usize;
        let mut status = SolveStatus::NumericalFailure;

        let mut factor = match LdlFactor::from_working_set(&self.m_fac, &ws) {
            Some(f) => f,
            None => return self.finish(&v, lambda, ws, seq, iter, status),
        };

        loop {
            if factor.is_singular() {
                let dir = factor.null_direction();
                let block = blocking_positions(&dir);
                if block.is_empty() {
                    status = SolveStatus::InfeasibleDetected;
                    break;
                }
                if iter >= cfg.max_iter {
                    status = SolveStatus::IterationCapReached;
                    break;
                }
                let pos = min_ratio(&ws, &lambda, &dir, &block);
                let step = (-lambda[ws[pos]] / dir[pos]).max(0.0);
                for (k, &i) in ws.iter().enumerate() {
                    lambda[i] += step * dir[k];
                }
                lambda[ws[pos]] = 0.0;
                ws.remove(pos);
                factor.remove(pos);
            } else {
                let mut lam_star: Vec<f64> = ws.iter().map(|&i| -d[i]).collect();
                factor.solve(&mut lam_star);
                let dual_feasible = lam_star.iter().all(|&l| l >= -cfg.eps_dual);
                if dual_feasible {
                    for (k, &i) in ws.iter().enumerate() {
                        lambda[i] = lam_star[k];
                    }
                    // mu = d + M M' lambda is the primal slack b - A x.
                    let u = self.m_fac.transpose() * &lambda;
                    let mut add = None;
                    let mut best = -cfg.eps_primal;
                    for i in 0..m {
                        if ws.contains(&i) {
                            continue;
                        }
                        let mu = d[i] + self.m_fac.row(i).dot(&u.transpose());
                        if mu < best - TIE_TOL || (add.is_none() && mu < best) {
                            best = mu;
                            add = Some(i);
                        }
                    }
                    let Some(j) = add else {
                        status = SolveStatus::Optimal;
                        break;
                    };
                    if iter >= cfg.max_iter {
                        status = SolveStatus::IterationCapReached;
                        break;
                    }
                    factor.push(&self.m_fac, &ws, j);
                    ws.push(j);
                } else {
                    if iter >= cfg.max_iter {
                        status = SolveStatus::IterationCapReached;
                        break;
                    }
                    let dir: Vec<f64> = ws
                        .iter()
                        .zip(&lam_star)
                        .map(|(&i, ls)| ls - lambda[i])
                        .collect();
                    let block = blocking_positions(&dir);
                    if block.is_empty() {
                        status = SolveStatus::NumericalFailure;
                        break;
                    }
                    let pos = min_ratio(&ws, &lambda, &dir, &block);
                    let step = (-lambda[ws[pos]] / dir[pos]).max(0.0);
                    for (k, &i) in ws.iter().enumerate() {
                        lambda[i] += step * dir[k];
                    }
                    lambda[ws[pos]] = 0.0;
                    ws.remove(pos);
                    factor.remove(pos);
                }
            }
            iter += 1;
            seq.push(WorkingSet(ws.clone()));
        }
        let mut trace = self.finish(&v, lambda, ws, seq, iter, status);
        trace.flop_estimate = super::cost_model(&trace, n, m);
        trace
    }

    fn finish(
        &self,
        v: &DVector<f64>,
        lambda: DVector<f64>,
        ws: Vec<usize>,
        seq: Vec<WorkingSet>,
        iter: usize,
        status: SolveStatus,
    ) -> SolveTrace {
        let u = v + self.m_fac.transpose() * &lambda;
        let x = -self
            .l
            .transpose()
            .solve_upper_triangular(&u)
            .expect("Cholesky factor has a positive diagonal");
        SolveTrace {
            x_star: x,
            lambda_star: lambda,
            active_set: WorkingSet(ws),
            ws_sequence: seq,
            iterations: iter,
            status,
            flop_estimate: 0,
        }
    }
}

/// Position (into `ws`) of the blocking index with the smallest step
/// `-lambda_i / dir_i`; ties go to the lowest constraint index.
fn min_ratio(ws: &[usize], lambda: &DVector<f64>, dir: &[f64], block: &[usize]) -> usize {
    let mut order: Vec<usize> = block.to_vec();
    order.sort_by_key(|&k| ws[k]);
    let mut best_pos = order[0];
    let mut best = -lambda[ws[best_pos]] / dir[best_pos];
    for &k in &order[1..] {
        let r = -lambda[ws[k]] / dir[k];
        if r < best - TIE_TOL {
            best = r;
            best_pos = k;
        }
    }
    best_pos
}

/// One-shot solve of a [`DenseQP`].
pub fn dual_active_set_solve(qp: &DenseQP, cfg: &SolverConfig) -> Result<SolveTrace, QpError> {
    cfg.validate(qp.m())?;
    let solver = DualActiveSetSolver::new(&qp.h, &qp.a)?;
    Ok(solver.solve(&qp.f, &qp.b, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::check_kkt;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn interior_optimum_needs_no_iterations() {
        let qp = DenseQP::new(
            DMatrix::identity(2, 2),
            dvector![-0.5, 0.2],
            dmatrix![1.0, 0.0; 0.0, 1.0; -1.0, 0.0],
            dvector![1.0, 1.0, 1.0],
        )
        .unwrap();
        let t = dual_active_set_solve(&qp, &SolverConfig::default()).unwrap();
        assert_eq!(t.status, SolveStatus::Optimal);
        assert_eq!(t.iterations, 0);
        assert!(t.active_set.is_empty());
        assert_eq!(t.ws_sequence, vec![WorkingSet::empty()]);
        assert_relative_eq!(t.x_star, dvector![0.5, -0.2], epsilon = 1e-14);
    }

    #[test]
    fn single_active_constraint() {
        let qp = DenseQP::new(
            DMatrix::identity(2, 2),
            dvector![-2.0, 0.0],
            dmatrix![1.0, 0.0],
            dvector![1.0],
        )
        .unwrap();
        let t = dual_active_set_solve(&qp, &SolverConfig::default()).unwrap();
        assert_eq!(t.status, SolveStatus::Optimal);
        assert_relative_eq!(t.x_star, dvector![1.0, 0.0], epsilon = 1e-14);
        assert_relative_eq!(t.lambda_star, dvector![1.0], epsilon = 1e-14);
        assert_eq!(t.active_set, WorkingSet(vec![0]));
        assert_eq!(t.iterations, 1);
        assert_eq!(t.ws_sequence.len(), 2);
    }

    #[test]
    fn dependent_addition_steps_through_null_space() {
        // Three constraints in the plane; the optimum has two active.
        let qp = DenseQP::new(
            DMatrix::identity(2, 2),
            dvector![-4.0, -4.0],
            dmatrix![1.0, 0.0; 0.0, 1.0; 1.0, 1.0],
            dvector![1.0, 1.0, 1.5],
        )
        .unwrap();
        let t = dual_active_set_solve(&qp, &SolverConfig::default()).unwrap();
        assert_eq!(t.status, SolveStatus::Optimal);
        assert!(check_kkt(&qp, &t.x_star, &t.lambda_star, 1e-9, 1e-9));
        for w in t.ws_sequence.windows(2) {
            assert_eq!((w[0].len() as i64 - w[1].len() as i64).abs(), 1);
        }
    }

    #[test]
    fn infeasible_problem_is_detected() {
        let qp = DenseQP::new(
            DMatrix::identity(1, 1),
            dvector![0.0],
            dmatrix![1.0; -1.0],
            dvector![-1.0, -1.0],
        )
        .unwrap();
        let t = dual_active_set_solve(&qp, &SolverConfig::default()).unwrap();
        assert_eq!(t.status, SolveStatus::InfeasibleDetected);
    }

    #[test]
    fn iteration_cap() {
        let qp = DenseQP::new(
            DMatrix::identity(2, 2),
            dvector![-4.0, -4.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
            dvector![1.0, 1.0],
        )
        .unwrap();
        let cfg = SolverConfig {
            max_iter: 1,
            ..SolverConfig::default()
        };
        let t = dual_active_set_solve(&qp, &cfg).unwrap();
        assert_eq!(t.status, SolveStatus::IterationCapReached);
        assert_eq!(t.iterations, 1);
        assert_eq!(t.ws_sequence.len(), 2);
    }

    #[test]
    fn warm_working_set_is_honoured() {
        let qp = DenseQP::new(
            DMatrix::identity(2, 2),
            dvector![-0.5, 0.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
            dvector![1.0, 1.0],
        )
        .unwrap();
        let cfg = SolverConfig {
            initial_ws: WorkingSet(vec![0]),
            ..SolverConfig::default()
        };
        let t = dual_active_set_solve(&qp, &cfg).unwrap();
        assert_eq!(t.status, SolveStatus::Optimal);
        assert_eq!(t.ws_sequence[0], WorkingSet(vec![0]));
        assert!(t.active_set.is_empty());
        assert_relative_eq!(t.x_star, dvector![0.5, 0.0], epsilon = 1e-14);
    }

    #[test]
    fn invalid_config_rejected() {
        let qp = DenseQP::new(
            DMatrix::identity(1, 1),
            dvector![0.0],
            dmatrix![1.0],
            dvector![1.0],
        )
        .unwrap();
        let bad = SolverConfig {
            eps_primal: 0.0,
            ..SolverConfig::default()
        };
        assert!(dual_active_set_solve(&qp, &bad).is_err());
        let bad = SolverConfig {
            max_iter: 0,
            ..SolverConfig::default()
        };
        assert!(dual_active_set_solve(&qp, &bad).is_err());
    }
}
