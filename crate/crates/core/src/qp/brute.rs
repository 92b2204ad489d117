use super::{validate_working_set, DenseQP, QpError, WorkingSet};
use nalgebra::{DMatrix, DVector};

/// Upper bound on the number of candidate working sets enumerated.
pub const MAX_ENUMERATION: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceSolution {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub active: WorkingSet,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

fn candidate_count(m: usize, n: usize) -> u128 {
    (0..=n.min(m)).map(|k| binomial(m, k)).sum()
}

/// Full KKT system solved by LU, independent of the Cholesky/Schur path
/// used by the solver.
fn kkt_lu(qp: &DenseQP, ws: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = qp.n();
    let k = ws.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&qp.h);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-&qp.f));
    for (r, &i) in ws.iter().enumerate() {
        for c in 0..n {
            kkt[(n + r, c)] = qp.a[(i, c)];
            kkt[(c, n + r)] = qp.a[(i, c)];
        }
        rhs[n + r] = qp.b[i];
    }
    let lu = kkt.clone().full_piv_lu();
    let u_diag = lu.u().diagonal();
    let max = u_diag.amax();
    let min = u_diag.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if !(min > 1e-10 * max.max(1.0)) {
        return None;
    }
    let sol = lu.solve(&rhs)?;
    if (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()))
}

fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    for pos in (0..k).rev() {
        if idx[pos] < m - k + pos {
            idx[pos] += 1;
            for p in pos + 1..k {
                idx[p] = idx[p - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Finds the optimum by enumerating every working set of size at most `n`
/// and keeping the first one whose equality-constrained solution satisfies
/// the KKT conditions. Sets are visited by increasing size, then
/// lexicographically.
pub fn brute_force_solve(qp: &DenseQP) -> Result<BruteForceSolution, QpError> {
    let n = qp.n();
    let m = qp.m();
    let count = candidate_count(m, n);
    if count > MAX_ENUMERATION {
        return Err(QpError::EnumerationTooLarge { count });
    }
    let scale = 1.0 + qp.b.amax().max(qp.f.amax());
    let tol = 1e-9 * scale;
    for k in 0..=n.min(m) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            validate_working_set(&idx, m)?;
            if let Some((x, lam_w)) = kkt_lu(qp, &idx) {
                let primal_ok = (0..m).all(|i| qp.a.row(i).dot(&x.transpose()) - qp.b[i] <= tol);
                let dual_ok = lam_w.iter().all(|&l| l >= -tol);
                if primal_ok && dual_ok {
                    let mut lambda = DVector::zeros(m);
                    for (r, &i) in idx.iter().enumerate() {
                        lambda[i] = lam_w[r];
                    }
                    return Ok(BruteForceSolution {
                        x,
                        lambda,
                        active: WorkingSet(idx),
                    });
                }
            }
            if k == 0 || !next_combination(&mut idx, m) {
                break;
            }
        }
    }
    Err(QpError::NoKktPoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn unconstrained_optimum_feasible() {
        let qp = DenseQP::new(
            DMatrix::identity(2, 2),
            dvector![-0.5, 0.5],
            dmatrix![1.0, 0.0; 0.0, 1.0],
            dvector![1.0, 1.0],
        )
        .unwrap();
        let s = brute_force_solve(&qp).unwrap();
        assert!(s.active.is_empty());
        assert_relative_eq!(s.x, dvector![0.5, -0.5], epsilon = 1e-14);
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
        let s = brute_force_solve(&qp).unwrap();
        assert_eq!(s.active, WorkingSet(vec![0]));
        assert_relative_eq!(s.x, dvector![1.0, 0.0], epsilon = 1e-14);
        assert_relative_eq!(s.lambda, dvector![1.0], epsilon = 1e-14);
    }

    #[test]
    fn infeasible_has_no_kkt_point() {
        let qp = DenseQP::new(
            DMatrix::identity(1, 1),
            dvector![0.0],
            dmatrix![1.0; -1.0],
            dvector![-1.0, -1.0],
        )
        .unwrap();
        assert!(matches!(brute_force_solve(&qp), Err(QpError::NoKktPoint)));
    }

    #[test]
    fn enumeration_guard() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(candidate_count(4, 2), 1 + 4 + 6);
        let n = 20;
        let a = DMatrix::from_fn(40, n, |r, c| if r % n == c { 1.0 } else { 0.0 });
        let qp = DenseQP::new(
            DMatrix::identity(n, n),
            DVector::zeros(n),
            a,
            DVector::from_element(40, 1.0),
        )
        .unwrap();
        assert!(matches!(
            brute_force_solve(&qp),
            Err(QpError::EnumerationTooLarge { .. })
        ));
    }
}
