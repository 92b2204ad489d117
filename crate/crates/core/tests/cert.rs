mod common;

use mpc_cert::cert::{
    certify, measure, read_partition, sample_uniform, wcet, write_partition, CertOptions, CostMode,
    DaqpProgram, Partition, PartitionStatus, RegionStatus,
};
use mpc_cert::condense::{MpcController, ParametricQP};
use mpc_cert::config::OcpConfig;
use mpc_cert::poly::Polyhedron;
use mpc_cert::qp::SolverConfig;
use nalgebra::DVector;
use rand::Rng;

fn double_integrator() -> (OcpConfig, ParametricQP, Partition) {
    let cfg = OcpConfig::double_integrator();
    let pqp = cfg.pqp().unwrap();
    let part = certify(
        &pqp,
        &cfg.theta_set().unwrap(),
        &cfg.solver,
        &CertOptions::default(),
    )
    .unwrap();
    (cfg, pqp, part)
}

fn grid(n: usize) -> impl Iterator<Item = DVector<f64>> {
    let step = 10.0 / (n - 1) as f64;
    (0..n).flat_map(move |i| {
        (0..n).map(move |j| DVector::from_vec(vec![-5.0 + step * i as f64, -5.0 + step * j as f64]))
    })
}

#[test]
fn grid_runs_match_their_regions() {
    let (cfg, pqp, part) = double_integrator();
    assert_eq!(part.status, PartitionStatus::Complete);
    let mpc = MpcController::new(pqp).unwrap();
    let mut mismatches = 0;
    let mut grid_max = 0;
    for theta in grid(200) {
        let trace = mpc.step(&theta, &cfg.solver).unwrap().trace;
        grid_max = grid_max.max(trace.iterations);
        let hits = part.locate(&theta, 1e-9);
        let ok = hits.iter().any(|&r| {
            let reg = &part.regions[r];
            reg.iterations == trace.iterations && reg.ws_sequence == trace.ws_sequence
        });
        mismatches += (!ok) as usize;
    }
    assert_eq!(mismatches, 0);
    assert!(grid_max <= part.max_iterations());
}

#[test]
fn interior_samples_reproduce_sequences() {
    let (cfg, pqp, part) = double_integrator();
    let mpc = MpcController::new(pqp).unwrap();
    let mut rng = common::rng(3);
    for r in part.regions.iter().filter(|r| r.witness.is_some()) {
        let w = r.witness.as_ref().unwrap();
        let trace = mpc.step(w, &cfg.solver).unwrap().trace;
        assert_eq!(
            trace.ws_sequence, r.ws_sequence,
            "witness of region {}",
            r.id
        );
        // Points pulled towards the witness stay strictly inside.
        let (lo, hi) = r.poly.bounding_box().unwrap();
        let mut found = 0;
        while found < 10 {
            let p = DVector::from_fn(2, |k, _| rng.gen_range(lo[k]..=hi[k]));
            if r.poly.max_violation(&p) > -1e-9 {
                continue;
            }
            found += 1;
            assert_eq!(
                mpc.step(&p, &cfg.solver).unwrap().trace.ws_sequence,
                r.ws_sequence
            );
        }
    }
}

#[test]
fn uniform_samples_are_covered_once() {
    let (_, _, part) = double_integrator();
    let samples = sample_uniform(&[-5.0, -5.0], &[5.0, 5.0], 10_000, 11);
    let mut multi = 0;
    for s in &samples {
        let hits = part.locate(s, 1e-9);
        assert!(!hits.is_empty(), "{s} is not covered");
        let interior = part
            .regions
            .iter()
            .filter(|r| r.poly.max_violation(s) < -1e-9)
            .count();
        multi += (interior > 1) as usize;
    }
    assert!(multi as f64 <= 1e-3 * samples.len() as f64);
    // Witnesses lie in exactly one region interior.
    for r in part.regions.iter().filter_map(|r| r.witness.as_ref()) {
        let inside = part
            .regions
            .iter()
            .filter(|q| q.poly.max_violation(r) < -1e-9)
            .count();
        assert_eq!(inside, 1);
    }
}

#[test]
fn sub_box_has_smaller_wcet() {
    let (cfg, pqp, part) = double_integrator();
    let small = Polyhedron::from_box(&[-1.0, -1.0], &[2.0, 1.5]).unwrap();
    let sub = certify(&pqp, &small, &cfg.solver, &CertOptions::default()).unwrap();
    let mut prog = DaqpProgram::new(MpcController::new(pqp).unwrap(), cfg.solver.clone());
    let big = wcet(&measure(&part, &mut prog, CostMode::Flops).unwrap())
        .unwrap()
        .0;
    let small = wcet(&measure(&sub, &mut prog, CostMode::Flops).unwrap())
        .unwrap()
        .0;
    assert!(small <= big);
}

#[test]
fn wcet_sits_in_a_deepest_region() {
    let (cfg, pqp, part) = double_integrator();
    let mut prog = DaqpProgram::new(MpcController::new(pqp).unwrap(), cfg.solver.clone());
    let tau = measure(&part, &mut prog, CostMode::Flops).unwrap();
    assert_eq!(
        tau.len(),
        part.regions.iter().filter(|r| r.witness.is_some()).count()
    );
    let (_, id) = wcet(&tau).unwrap();
    assert_eq!(part.regions[id].iterations, part.max_iterations());
    assert_eq!(tau, measure(&part, &mut prog, CostMode::Flops).unwrap());
}

#[test]
fn unconstrained_problem_is_one_region() {
    let mut cfg = OcpConfig::double_integrator();
    cfg.input_lower = None;
    cfg.input_upper = None;
    let pqp = cfg.pqp().unwrap();
    let part = certify(
        &pqp,
        &cfg.theta_set().unwrap(),
        &cfg.solver,
        &CertOptions::default(),
    )
    .unwrap();
    assert_eq!(part.regions.len(), 1);
    assert_eq!(part.regions[0].iterations, 0);
    let mut prog = DaqpProgram::new(MpcController::new(pqp).unwrap(), SolverConfig::default());
    assert_eq!(measure(&part, &mut prog, CostMode::Flops).unwrap().len(), 1);
}

#[test]
fn partition_file_round_trip() {
    let (_, _, part) = double_integrator();
    let mut buf = Vec::new();
    write_partition(&mut buf, &part).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), part.regions.len() + 1);
    let back = read_partition(buf.as_slice()).unwrap();
    assert_eq!(back.regions, part.regions);
    assert_eq!(back.theta_set, part.theta_set);
    assert_eq!(back.pqp_checksum, part.pqp_checksum);
    assert_eq!(back.status, part.status);
}

#[test]
fn tiny_budget_flags_partial_result() {
    let cfg = OcpConfig::quadrotor();
    let pqp = cfg.pqp().unwrap();
    let opts = CertOptions {
        region_budget: 5,
        ..CertOptions::default()
    };
    let part = certify(&pqp, &cfg.theta_set().unwrap(), &cfg.solver, &opts).unwrap();
    assert_eq!(part.status, PartitionStatus::BudgetExceeded);
    assert_eq!(part.regions.len(), 5);
    assert!(part
        .regions
        .iter()
        .all(|r| r.status != RegionStatus::NumericalFailure));
}

/// A 12-d set from a quadrotor split that is empty by about 3.5e-5. With
/// the default variable box the simplex reports a singular basis.
#[test]
fn near_empty_set_is_recognised_inside_a_box() {
    #[derive(serde::Deserialize)]
    struct Raw {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    }
    let raw: Raw = serde_json::from_str(include_str!("data/near_empty_12d.json")).unwrap();
    let a = nalgebra::DMatrix::from_fn(raw.a.len(), 12, |r, c| raw.a[r][c]);
    let p = Polyhedron::new(a, DVector::from_vec(raw.b)).unwrap();
    let (lo, hi) = (vec![-10.0; 12], vec![10.0; 12]);
    assert_eq!(p.chebyshev_within(&lo, &hi).unwrap(), None);

    // Loosening every row by more than the gap makes it nonempty again.
    let slack = DVector::from_iterator(p.rows(), p.a.row_iter().map(|r| 1e-3 * r.norm()));
    let loose = Polyhedron::new(p.a.clone(), &p.b + slack).unwrap();
    let (c, r) = loose.chebyshev_within(&lo, &hi).unwrap().unwrap();
    assert!(r > 0.0);
    assert!(loose.contains(&c, 1e-9));
}
