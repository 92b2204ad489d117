//! Linear MPC as parametric quadratic programming.
//!
//! The crate covers the whole pipeline: condensing a linear MPC problem into a
//! parametric QP, solving it with a dual active-set method that records its
//! working-set sequence, certifying that sequence exactly over a polyhedral
//! parameter set, building data-driven parameter sets from logged error
//! states, and running a nonlinear quadrotor model in closed loop against both
//! the active-set solver and an ADMM baseline.
//!
//! Module map:
//!
//! - [`qp`]: dense QPs, the dual transform, KKT solves, the dual active-set
//!   solver, a brute-force enumeration oracle and the flop cost model.
//! - [`admm`]: Riccati-cached ADMM for input-constrained LQR problems.
//! - [`condense`]: OCP description, DARE terminal cost, condensing and
//!   receding-horizon steps.
//! - [`cert`]: exact complexity certification, per-region measurement and
//!   benchmark tables.
//! - [`pca`]: rotated hyper-rectangles from logged error states.
//! - [`sim`]: quadrotor dynamics, hover linearization, references and the
//!   closed-loop harness.
//! - [`config`]: the OCP config file schema shared by the CLI and the demos.
//! - [`table`]: CSV files with a units and provenance header.

// `!(x > tol)` is used on purpose so NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admm;
pub mod cert;
pub mod condense;
pub mod config;
pub mod pca;
pub mod poly;
pub mod qp;
pub mod sim;
pub mod table;

mod checksum;

pub use checksum::Checksum;
