mod common;

use mpc_cert::qp::{
    brute_force_solve, check_kkt, cost_model, dual_active_set_solve, to_dual, DenseQP,
    DualActiveSetSolver, SolveStatus, SolverConfig,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn qp_strategy() -> impl Strategy<Value = DenseQP> {
    any::<u64>().prop_map(|seed| common::random_qp(&mut common::rng(seed), 8, 16))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn optimal_results_satisfy_kkt(qp in qp_strategy()) {
        let t = dual_active_set_solve(&qp, &SolverConfig::default()).unwrap();
        if t.status == SolveStatus::Optimal {
            prop_assert!(check_kkt(&qp, &t.x_star, &t.lambda_star, 1e-4, 1e-4));
        }
    }

    #[test]
    fn consecutive_working_sets_differ_by_one(qp in qp_strategy()) {
        let t = dual_active_set_solve(&qp, &SolverConfig::default()).unwrap();
        prop_assert_eq!(t.ws_sequence.len(), t.iterations + 1);
        for w in t.ws_sequence.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let diff = if b.len() > a.len() {
                prop_assert!(a.as_slice().iter().all(|i| b.contains(*i)));
                b.len() - a.len()
            } else {
                prop_assert!(b.as_slice().iter().all(|i| a.contains(*i)));
                a.len() - b.len()
            };
            prop_assert_eq!(diff, 1);
        }
    }

    #[test]
    fn solves_are_deterministic(qp in qp_strategy()) {
        let a = dual_active_set_solve(&qp, &SolverConfig::default()).unwrap();
        let b = dual_active_set_solve(&qp, &SolverConfig::default()).unwrap();
        prop_assert_eq!(a.x_star.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.x_star.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dual_transform_round_trip(qp in qp_strategy()) {
        let dual = to_dual(&qp).unwrap();
        let gram = &dual.m_fac * dual.m_fac.transpose();
        let hinv = qp.h.clone().cholesky().unwrap().inverse();
        let direct = &qp.a * hinv * qp.a.transpose();
        let rel = (&gram - &direct).norm() / direct.norm().max(1e-300);
        prop_assert!(rel <= 1e-10, "relative error {}", rel);
    }

    #[test]
    fn optimal_matches_enumeration(seed in any::<u64>()) {
        let qp = common::random_qp(&mut common::rng(seed), 6, 12);
        let t = dual_active_set_solve(&qp, &SolverConfig::default()).unwrap();
        let oracle = brute_force_solve(&qp).unwrap();
        if t.status == SolveStatus::Optimal {
            prop_assert!((&t.x_star - &oracle.x).amax() <= 1e-6);
        }
    }
}

#[test]
fn flop_estimate_tracks_wall_clock() {
    // Rank correlation between the cost model and host timing across
    // problems of very different size and iteration count.
    let mut rng = common::rng(11);
    let mut pairs = Vec::new();
    for k in 0..60 {
        let n = 4 + (k % 6) * 8;
        let m = 2 * n;
        let b_mat = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let h = &b_mat * b_mat.transpose() + DMatrix::identity(n, n);
        let h = (&h + h.transpose()) * 0.5;
        let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let f = nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-20.0..20.0));
        let b = nalgebra::DVector::from_element(m, 1.0);
        let solver = DualActiveSetSolver::new(&h, &a).unwrap();
        let cfg = SolverConfig::default();
        let mut best = f64::INFINITY;
        let mut flops = 0;
        for _ in 0..15 {
            let start = std::time::Instant::now();
            let t = solver.solve(&f, &b, &cfg);
            best = best.min(start.elapsed().as_secs_f64());
            flops = t.flop_estimate;
            assert_eq!(flops, cost_model(&t, n, m));
        }
        pairs.push((flops as f64, best));
    }
    let rho = spearman(&pairs);
    assert!(rho > 0.9, "spearman rho = {rho}");
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(pairs: &[(f64, f64)]) -> f64 {
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ra, rb) = (ranks(&a), ranks(&b));
    let n = ra.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let cov: f64 = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| (x - mean) * (y - mean))
        .sum();
    let var: f64 = ra.iter().map(|x| (x - mean).powi(2)).sum();
    cov / var
}
