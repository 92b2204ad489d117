use crate::context::Context;
use crate::{Outcome, SolverChoice, TrajectoryChoice};
use anyhow::{anyhow, Context as _, Result};
use mpc_cert::admm::build_admm_cache;
use mpc_cert::condense::MpcController;
use mpc_cert::sim::{closed_loop, log_error_states, Controller, SimLog, Trajectory};
use mpc_cert::table::{col, write_csv};
use std::io::Write;

pub struct Overrides {
    pub trajectory: Option<TrajectoryChoice>,
    pub duration: Option<f64>,
    pub noise: Option<f64>,
    pub hover_scale: Option<f64>,
    pub log_rate: f64,
}

fn write_log(ctx: &Context, name: &str, log: &SimLog, rate: f64) -> Result<()> {
    let mut out = ctx.create(&format!("sim_{name}.csv"))?;
    log.write_csv(&mut out, &ctx.header(&format!("closed loop with {name}")))?;
    out.flush()?;
    let states = log_error_states(log, rate)?;
    let mut out = ctx.create(&format!("states_{name}.csv"))?;
    states.write_csv(&mut out, &ctx.header(&format!("error states with {name}")))?;
    out.flush()?;
    Ok(())
}

pub fn run(ctx: &Context, o: Overrides) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let params = cfg
        .quad_params()
        .ok_or_else(|| anyhow!("sim needs a quadrotor model in the config"))?;
    let traj = match o.trajectory {
        Some(TrajectoryChoice::Steps) => Trajectory::default_steps(),
        Some(TrajectoryChoice::FigureEight) => Trajectory::default_figure_eight(),
        Some(TrajectoryChoice::Hover) => Trajectory::Hover {
            position: [0.0, 0.0, 1.0],
        },
        None => cfg
            .trajectory
            .clone()
            .unwrap_or_else(Trajectory::default_steps),
    };
    let mut settings = cfg.sim.clone();
    settings.duration = o.duration.or(settings.duration);
    settings.noise_std = o.noise.unwrap_or(settings.noise_std);
    settings.hover_scale = o.hover_scale.unwrap_or(settings.hover_scale);
    settings.deadline_flops = ctx.budget.or(settings.deadline_flops);

    let ocp = cfg.ocp()?;
    for name in ctx.solvers(SolverChoice::Both) {
        let mut controller = match name {
            "daqp" => Controller::daqp(MpcController::from_ocp(&ocp)?, cfg.solver.clone()),
            _ => Controller::admm(build_admm_cache(&ocp, &cfg.admm)?),
        };
        let log = match closed_loop(&mut controller, &traj, params, &settings) {
            Ok(log) => log,
            Err((e, partial)) => {
                write_log(ctx, name, &partial, o.log_rate)?;
                return Err(e).with_context(|| format!("{name} run (partial log written)"));
            }
        };
        write_log(ctx, name, &log, o.log_rate)?;
        let s = log.summary(params);
        let mut out = ctx.create(&format!("summary_{name}.csv"))?;
        write_csv(
            &mut out,
            &ctx.header(&format!("closed-loop summary for {name}")),
            &[
                col("ticks", "-"),
                col("rms_x", "m"),
                col("rms_y", "m"),
                col("rms_z", "m"),
                col("max_abs_u", "pwm"),
                col("violations", "-"),
                col("max_iterations", "-"),
                col("max_flops", "flops"),
            ],
            [vec![
                s.ticks as f64,
                s.rms_error[0],
                s.rms_error[1],
                s.rms_error[2],
                s.max_abs_u,
                s.violations as f64,
                s.max_iterations as f64,
                s.max_flops as f64,
            ]],
        )?;
        out.flush()?;
        println!(
            "{name}: RMS error x {:.4} y {:.4} z {:.4} m, max |u| {:.3}, {} deadline violations",
            s.rms_error[0], s.rms_error[1], s.rms_error[2], s.max_abs_u, s.violations
        );
    }
    Ok(Outcome::Done)
}
