#![allow(dead_code)]

use mpc_cert::qp::DenseQP;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random feasible QP: `H = B B' + 0.1 I`, constraints satisfied with slack
/// at a random point.
pub fn random_qp(rng: &mut ChaCha8Rng, n_max: usize, m_max: usize) -> DenseQP {
    let n = rng.gen_range(1..=n_max);
    let m = rng.gen_range(1..=m_max);
    let b_mat = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = &b_mat * b_mat.transpose() + DMatrix::identity(n, n) * 0.1;
    let h = (&h + h.transpose()) * 0.5;
    let f = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
    let slack = DVector::from_fn(m, |_, _| rng.gen_range(0.0..1.0));
    let b = &a * x0 + slack;
    DenseQP::new(h, f, a, b).expect("random QP is valid")
}
