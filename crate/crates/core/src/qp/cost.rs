//! Floating-point operation count for a recorded solve.
//!
//! The count follows the arithmetic the solver performs, with `w = |W_j|`
//! the working-set size before transition `j`:
//!
//! | step                                   | flops                       |
//! |----------------------------------------|-----------------------------|
//! | setup `v = L^-1 f`, `d = b + M v`      | `n^2 + 2mn + m`             |
//! | dual solve on `W` (`L D L'`)           | `2w^2 + w`                  |
//! | add: slack `d + M (M_W' lambda_W)`     | `2nw + 2mn + m`             |
//! | add: factor row append                 | `2nw + w^2 + 2w + n`        |
//! | remove: ratio test and dual step       | `3w`                        |
//! | remove: rank-one downdate              | `4w^2`                      |
//! | final dual solve and primal recovery   | `2w^2 + w + 2nw`            |
//!
//! The setup term already contains the slack check of the empty working set,
//! so a zero-iteration trace costs [`fixed_cost`] plus the final term.

use super::SolveTrace;

pub fn fixed_cost(n: usize, m: usize) -> u64 {
    let (n, m) = (n as u64, m as u64);
    n * n + 2 * m * n + m
}

fn add_cost(n: u64, m: u64, w: u64) -> u64 {
    (2 * w * w + w) + (2 * n * w + 2 * m * n + m) + (2 * n * w + w * w + 2 * w + n)
}

fn remove_cost(w: u64) -> u64 {
    (2 * w * w + w) + 3 * w + 4 * w * w
}

fn final_cost(n: u64, w: u64) -> u64 {
    2 * w * w + w + 2 * n * w
}

/// Flop estimate of `trace` for a problem with `n` variables and `m`
/// constraints. Transitions are classified from consecutive working sets.
pub fn cost_model(trace: &SolveTrace, n: usize, m: usize) -> u64 {
    let (n64, m64) = (n as u64, m as u64);
    let mut total = fixed_cost(n, m);
    for pair in trace.ws_sequence.windows(2) {
        let w = pair[0].len() as u64;
        total += if pair[1].len() > pair[0].len() {
            add_cost(n64, m64, w)
        } else {
            remove_cost(w)
        };
    }
    let last = trace.ws_sequence.last().map_or(0, |w| w.len()) as u64;
    total + final_cost(n64, last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::{SolveStatus, WorkingSet};
    use nalgebra::DVector;

    fn trace(seq: Vec<Vec<usize>>) -> SolveTrace {
        SolveTrace {
            x_star: DVector::zeros(2),
            lambda_star: DVector::zeros(3),
            active_set: WorkingSet(seq.last().unwrap().clone()),
            iterations: seq.len() - 1,
            ws_sequence: seq.into_iter().map(WorkingSet).collect(),
            status: SolveStatus::Optimal,
            flop_estimate: 0,
        }
    }

    #[test]
    fn zero_iterations_is_setup_only() {
        let t = trace(vec![vec![]]);
        assert_eq!(cost_model(&t, 2, 3), fixed_cost(2, 3));
        assert_eq!(fixed_cost(2, 3), 4 + 12 + 3);
    }

    #[test]
    fn extra_iteration_costs_more() {
        let a = trace(vec![vec![], vec![0]]);
        let b = trace(vec![vec![], vec![0], vec![0, 1]]);
        let c = trace(vec![vec![], vec![0], vec![0, 1], vec![1]]);
        assert!(cost_model(&b, 2, 3) > cost_model(&a, 2, 3));
        assert!(cost_model(&c, 2, 3) > cost_model(&b, 2, 3) - final_cost(2, 2));
        assert!(remove_cost(2) > 0);
    }
}
