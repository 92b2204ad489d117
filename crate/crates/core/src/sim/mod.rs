//! Nonlinear quadrotor model and the closed-loop harness.
//!
//! The controller sees the 12-dimensional error state `[p, r, v, omega]`
//! relative to the reference, where `r` are the Rodrigues parameters of the
//! attitude quaternion. The plant integrates the full rigid body with RK4 at
//! `sim_rate` and the controller runs with zero-order hold at
//! `control_rate`.

mod dynamics;
mod trajectory;

pub use dynamics::{
    dynamics_step, linearize_hover, motor_map, quaternion_to_rodrigues, rodrigues_to_quaternion,
    QuadParams, QuadState, NU, NZ,
};
pub use trajectory::Trajectory;

use crate::admm::{admm_solve_from, AdmmCache, AdmmStatus, AdmmTrace};
use crate::condense::MpcController;
use crate::pca::StateLog;
use crate::qp::{SolveStatus, SolverConfig};
use crate::table::{col, write_csv, Column, FileHeader};
use nalgebra::{DVector, SVector, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("attitude too close to a half turn for Rodrigues parameters (w = {0})")]
    NearSingularAttitude(f64),
    #[error("simulation diverged at t = {time} s")]
    Diverged { time: f64 },
    #[error("controller failed: {0}")]
    Controller(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The MPC solver used in the loop.
pub enum Controller {
    Daqp {
        mpc: MpcController,
        cfg: SolverConfig,
    },
    Admm {
        cache: AdmmCache,
        last: Option<AdmmTrace>,
    },
}

/// Result of one controller call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: Vector4<f64>,
    pub iterations: usize,
    pub flops: u64,
    pub converged: bool,
}

impl Controller {
    pub fn daqp(mpc: MpcController, cfg: SolverConfig) -> Self {
        Controller::Daqp { mpc, cfg }
    }

    pub fn admm(cache: AdmmCache) -> Self {
        Controller::Admm { cache, last: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Controller::Daqp { .. } => "daqp",
            Controller::Admm { .. } => "admm",
        }
    }

    pub fn control(&mut self, z: &SVector<f64, NZ>) -> Result<ControlOutput, SimError> {
        let theta = DVector::from_column_slice(z.as_slice());
        let out = match self {
            Controller::Daqp { mpc, cfg } => {
                let step = mpc
                    .step(&theta, cfg)
                    .map_err(|e| SimError::Controller(e.to_string()))?;
                if matches!(
                    step.trace.status,
                    SolveStatus::InfeasibleDetected | SolveStatus::NumericalFailure
                ) {
                    return Err(SimError::Controller(format!(
                        "solver status {:?}",
                        step.trace.status
                    )));
                }
                ControlOutput {
                    u: Vector4::from_iterator(step.u0.iter().copied()),
                    iterations: step.trace.iterations,
                    flops: step.trace.flop_estimate,
                    converged: step.trace.status == SolveStatus::Optimal,
                }
            }
            Controller::Admm { cache, last } => {
                let warm = if cache.settings.warm_start {
                    last.as_ref()
                } else {
                    None
                };
                let trace = admm_solve_from(cache, &theta, warm)
                    .map_err(|e| SimError::Controller(e.to_string()))?;
                let out = ControlOutput {
                    u: Vector4::from_iterator(trace.u_sequence.row(0).iter().copied()),
                    iterations: trace.iterations,
                    flops: trace.flop_estimate,
                    converged: trace.status == AdmmStatus::Converged,
                };
                *last = Some(trace);
                out
            }
        };
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    /// Run length [s]; `None` uses the trajectory's natural length.
    pub duration: Option<f64>,
    pub sim_rate: f64,
    pub control_rate: f64,
    /// Flops available per control tick. A solve costing more misses its
    /// deadline: it runs over `ceil(flops / budget)` ticks, the previous
    /// command is held meanwhile and the late result is applied when done.
    pub deadline_flops: Option<u64>,
    /// Factor on the hover command the controller assumes.
    pub hover_scale: f64,
    /// Standard deviation of Gaussian noise on the measured error state.
    pub noise_std: f64,
    pub seed: u64,
    /// Position norm treated as divergence [m].
    pub divergence_bound: f64,
    /// Initial error relative to the reference at `t = 0`.
    pub initial_error: Option<Vec<f64>>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            duration: None,
            sim_rate: 1000.0,
            control_rate: 500.0,
            deadline_flops: None,
            hover_scale: 1.0,
            noise_std: 0.0,
            seed: 0,
            divergence_bound: 50.0,
            initial_error: None,
        }
    }
}

/// One control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub time: f64,
    pub state: QuadState,
    pub reference: SVector<f64, NZ>,
    pub error: SVector<f64, NZ>,
    pub u_m: Vector4<f64>,
    pub iterations: usize,
    pub flops: u64,
    pub violation: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub controller: String,
    pub control_rate: f64,
    pub samples: Vec<SimSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub controller: String,
    pub ticks: usize,
    /// RMS position error per axis [m].
    pub rms_error: [f64; 3],
    /// Largest deviation of a motor command from hover.
    pub max_abs_u: f64,
    pub violations: usize,
    pub max_iterations: usize,
    pub max_flops: u64,
}

fn validate(settings: &SimSettings) -> Result<usize, SimError> {
    let ratio = settings.sim_rate / settings.control_rate;
    let substeps = ratio.round();
    if !(settings.control_rate > 0.0 && substeps >= 1.0 && (ratio - substeps).abs() < 1e-9) {
        return Err(SimError::InvalidParams(
            "control rate must divide the simulation rate".into(),
        ));
    }
    if settings.sim_rate < 100.0 {
        return Err(SimError::InvalidParams(
            "simulation step must be at most 0.01 s".into(),
        ));
    }
    Ok(substeps as usize)
}

/// Runs `controller` on the nonlinear model along `traj`. On divergence the
/// partial log is returned together with the error.
pub fn closed_loop(
    controller: &mut Controller,
    traj: &Trajectory,
    params: &QuadParams,
    settings: &SimSettings,
) -> Result<SimLog, (SimError, SimLog)> {
    let mut log = SimLog {
        controller: controller.name().to_string(),
        control_rate: settings.control_rate,
        samples: Vec::new(),
    };
    let fail = |e: SimError, log: SimLog| Err((e, log));
    let substeps = match validate(settings).and_then(|s| params.validate().map(|_| s)) {
        Ok(s) => s,
        Err(e) => return fail(e, log),
    };
    let dt = 1.0 / settings.sim_rate;
    let duration = settings.duration.unwrap_or_else(|| traj.duration());
    let ticks = (duration * settings.control_rate).round() as usize;
    let u0_ctrl = params.u0() * settings.hover_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let noise = Normal::new(0.0, settings.noise_std.max(0.0)).ok();

    let z0 = SVector::<f64, NZ>::from_iterator(
        settings
            .initial_error
            .clone()
            .unwrap_or_default()
            .into_iter()
            .chain(std::iter::repeat(0.0))
            .take(NZ),
    );
    let mut state = QuadState::from_error_state(&z0, &traj.sample(0.0));
    let mut held = params.u0();
    let mut busy: Option<(u64, ControlOutput)> = None;

    for tick in 0..ticks {
        let time = tick as f64 / settings.control_rate;
        let reference = traj.sample(time);
        let error = match state.error_state(&reference) {
            Ok(e) => e,
            Err(e) => return fail(e, log),
        };
        let mut measured = error;
        if settings.noise_std > 0.0 {
            if let Some(n) = &noise {
                measured.iter_mut().for_each(|v| *v += n.sample(&mut rng));
            }
        }
        // A solve needing n budgets finishes n - 1 ticks late; the
        // previous command is held (and flagged) until then.
        let (u_m, clamped, violation, out) = match busy.take() {
            Some((1, out)) => {
                let (u_m, clamped) = motor_map(&out.u, &u0_ctrl);
                (u_m, clamped, true, out)
            }
            Some((n, out)) => {
                busy = Some((n - 1, out));
                (held, false, true, out)
            }
            None => {
                let out = match controller.control(&measured) {
                    Ok(o) => o,
                    Err(e) => return fail(e, log),
                };
                let ticks = settings
                    .deadline_flops
                    .map_or(1, |b| out.flops.div_ceil(b.max(1)).max(1));
                if ticks == 1 {
                    let (u_m, clamped) = motor_map(&out.u, &u0_ctrl);
                    (u_m, clamped, false, out)
                } else {
                    busy = Some((ticks - 1, out));
                    (held, false, true, out)
                }
            }
        };
        held = u_m;
        log.samples.push(SimSample {
            time,
            state,
            reference,
            error,
            u_m,
            iterations: out.iterations,
            flops: out.flops,
            violation,
            clamped,
        });
        for _ in 0..substeps {
            state = dynamics_step(&state, &u_m, params, dt).0;
        }
        if !(state.p.norm() <= settings.divergence_bound) {
            return fail(SimError::Diverged { time }, log);
        }
    }
    Ok(log)
}

impl SimLog {
    pub fn summary(&self, params: &QuadParams) -> SimSummary {
        let n = self.samples.len().max(1) as f64;
        let mut rms = [0.0; 3];
        for s in &self.samples {
            for (k, r) in rms.iter_mut().enumerate() {
                *r += s.error[k] * s.error[k];
            }
        }
        let u0 = params.hover_command();
        SimSummary {
            controller: self.controller.clone(),
            ticks: self.samples.len(),
            rms_error: rms.map(|v| (v / n).sqrt()),
            max_abs_u: self
                .samples
                .iter()
                .flat_map(|s| s.u_m.iter().map(move |v| (v - u0).abs()))
                .fold(0.0, f64::max),
            violations: self.samples.iter().filter(|s| s.violation).count(),
            max_iterations: self.samples.iter().map(|s| s.iterations).max().unwrap_or(0),
            max_flops: self.samples.iter().map(|s| s.flops).max().unwrap_or(0),
        }
    }

    /// Ticks whose time lies in `[t0, t1)`.
    pub fn window(&self, t0: f64, t1: f64) -> impl Iterator<Item = &SimSample> {
        self.samples
            .iter()
            .filter(move |s| s.time >= t0 && s.time < t1)
    }

    pub fn columns() -> Vec<Column> {
        let mut cols = vec![col("time", "s")];
        cols.extend(["px", "py", "pz"].map(|n| col(n, "m")));
        cols.extend(["qw", "qx", "qy", "qz"].map(|n| col(n, "-")));
        cols.extend(["vx", "vy", "vz"].map(|n| col(n, "m/s")));
        cols.extend(["wx", "wy", "wz"].map(|n| col(n, "rad/s")));
        cols.extend(["ex", "ey", "ez"].map(|n| col(n, "m")));
        cols.extend(["erx", "ery", "erz"].map(|n| col(n, "-")));
        cols.extend(["evx", "evy", "evz"].map(|n| col(n, "m/s")));
        cols.extend(["ewx", "ewy", "ewz"].map(|n| col(n, "rad/s")));
        cols.extend(["um1", "um2", "um3", "um4"].map(|n| col(n, "pwm")));
        cols.push(col("violation", "bool"));
        cols.push(col("clamped", "bool"));
        cols.push(col("iterations", "-"));
        cols.push(col("flops", "flops"));
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W, header: &FileHeader) -> Result<(), SimError> {
        let rows = self.samples.iter().map(|s| {
            let mut row = vec![s.time];
            row.extend(s.state.to_array());
            row.extend(s.error.iter());
            row.extend(s.u_m.iter());
            row.push(s.violation as u8 as f64);
            row.push(s.clamped as u8 as f64);
            row.push(s.iterations as f64);
            row.push(s.flops as f64);
            row
        });
        write_csv(out, header, &Self::columns(), rows)?;
        Ok(())
    }
}

/// Downsamples the true error states of `sim` to `rate` Hz.
pub fn log_error_states(sim: &SimLog, rate: f64) -> Result<StateLog, SimError> {
    if !(rate > 0.0 && rate <= sim.control_rate) {
        return Err(SimError::InvalidParams(
            "log rate must not exceed the control rate".into(),
        ));
    }
    let stride = (sim.control_rate / rate).round().max(1.0) as usize;
    let samples = sim
        .samples
        .iter()
        .step_by(stride)
        .map(|s| DVector::from_column_slice(s.error.as_slice()))
        .collect();
    Ok(StateLog {
        samples,
        rate_hz: rate,
        source: format!("simulation:{}", sim.controller),
    })
}
