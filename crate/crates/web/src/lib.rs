//! Browser bindings for the demo page. Each entry point returns a JSON
//! string; the plain functions underneath are testable natively.

// NaN must fail validation, hence the negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use mpc_cert::cert::{certify, CertOptions};
use mpc_cert::condense::MpcController;
use mpc_cert::config::OcpConfig;
use mpc_cert::pca::{build_pca_box, StateLog};
use mpc_cert::sim::{closed_loop, Controller, SimSettings, Trajectory};
use nalgebra::DVector;
use serde_json::{json, Value};
use std::error::Error;
use wasm_bindgen::prelude::*;

type Res<T> = Result<T, Box<dyn Error>>;

/// Partition of the double integrator's parameter box as 2-d polygons.
pub fn partition_json(horizon: usize, u_max: f64) -> Res<Value> {
    if !(u_max > 0.0) || horizon == 0 || horizon > 10 {
        return Err("need u_max > 0 and 1 <= horizon <= 10".into());
    }
    let mut cfg = OcpConfig::double_integrator();
    cfg.horizon = horizon;
    cfg.input_lower = Some(vec![-u_max]);
    cfg.input_upper = Some(vec![u_max]);
    let pqp = cfg.pqp()?;
    let part = certify(
        &pqp,
        &cfg.theta_set()?,
        &cfg.solver,
        &CertOptions::default(),
    )?;
    let regions: Vec<Value> = part
        .regions
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "iterations": r.iterations,
                "vertices": r.poly.vertices_2d(),
            })
        })
        .collect();
    Ok(json!({
        "regions": regions,
        "max_iterations": part.max_iterations(),
        "complete": part.capped_count() == 0,
    }))
}

/// PCA box around 2-d points, returned as its four corners.
pub fn pca_json(points: &[[f64; 2]], delta: f64) -> Res<Value> {
    let log = StateLog {
        samples: points.iter().map(|p| DVector::from_row_slice(p)).collect(),
        rate_hz: 1.0,
        source: "browser".into(),
    };
    let b = build_pca_box(&log, delta)?;
    let (lo, hi) = b.rotated_bounds();
    let corners: Vec<[f64; 2]> = [(0, 0), (1, 0), (1, 1), (0, 1)]
        .iter()
        .map(|&(i, j)| {
            let z = DVector::from_vec(vec![
                if i == 0 { lo[0] } else { hi[0] },
                if j == 0 { lo[1] } else { hi[1] },
            ]);
            let p = &b.mu + &b.u * z;
            [p[0], p[1]]
        })
        .collect();
    let inside = log.samples.iter().filter(|z| b.contains(z)).count();
    Ok(json!({ "corners": corners, "inside": inside, "area": b.volume() }))
}

/// Closed-loop quadrotor run, logged at 50 Hz.
pub fn sim_json(trajectory: &str, duration: f64, r_preset: f64, noise: f64) -> Res<Value> {
    let traj = match trajectory {
        "steps" => Trajectory::default_steps(),
        "figure-eight" => Trajectory::default_figure_eight(),
        "hover" => Trajectory::Hover {
            position: [0.0, 0.0, 1.0],
        },
        other => return Err(format!("unknown trajectory {other:?}").into()),
    };
    if !(duration > 0.0 && duration <= 30.0) {
        return Err("duration must be in (0, 30] s".into());
    }
    let cfg = OcpConfig::quadrotor().with_r_preset(r_preset);
    let params = cfg.quad_params().ok_or("no quadrotor model")?;
    let mut controller =
        Controller::daqp(MpcController::from_ocp(&cfg.ocp()?)?, cfg.solver.clone());
    let settings = SimSettings {
        duration: Some(duration),
        noise_std: noise,
        ..cfg.sim.clone()
    };
    let log = closed_loop(&mut controller, &traj, params, &settings).map_err(|(e, _)| e)?;
    let every = ((log.control_rate / 50.0).round() as usize).max(1);
    let rows: Vec<Value> = log
        .samples
        .iter()
        .step_by(every)
        .map(|s| {
            let p = s.state.p;
            json!([
                s.time,
                p[0],
                p[1],
                p[2],
                s.reference[0],
                s.reference[1],
                s.reference[2]
            ])
        })
        .collect();
    let s = log.summary(params);
    Ok(json!({
        "columns": ["t", "x", "y", "z", "ref_x", "ref_y", "ref_z"],
        "rows": rows,
        "rms_error": s.rms_error,
        "max_iterations": s.max_iterations,
        "max_flops": s.max_flops,
    }))
}

fn to_js(r: Res<Value>) -> Result<String, JsError> {
    r.map(|v| v.to_string())
        .map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn partition(horizon: usize, u_max: f64) -> Result<String, JsError> {
    to_js(partition_json(horizon, u_max))
}

/// `points` is a JSON array of `[x, y]` pairs.
#[wasm_bindgen]
pub fn pca_box(points: &str, delta: f64) -> Result<String, JsError> {
    let pts: Vec<[f64; 2]> = serde_json::from_str(points)?;
    to_js(pca_json(&pts, delta))
}

#[wasm_bindgen]
pub fn simulate(
    trajectory: &str,
    duration: f64,
    r_preset: f64,
    noise: f64,
) -> Result<String, JsError> {
    to_js(sim_json(trajectory, duration, r_preset, noise))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_has_polygons() {
        let v = partition_json(2, 1.0).unwrap();
        let regions = v["regions"].as_array().unwrap();
        assert!(regions.len() > 1);
        for r in regions {
            assert!(r["vertices"].as_array().unwrap().len() >= 3);
        }
        assert!(partition_json(0, 1.0).is_err());
    }

    #[test]
    fn pca_box_holds_its_points() {
        let pts: Vec<[f64; 2]> = (0..50)
            .map(|k| {
                let t = k as f64 / 10.0;
                [t, 0.5 * t + 0.1 * (k % 3) as f64]
            })
            .collect();
        let v = pca_json(&pts, 1.0).unwrap();
        assert_eq!(v["inside"], 50);
        assert_eq!(v["corners"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn hover_stays_put() {
        let v = sim_json("hover", 1.0, 900.0, 0.0).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 50);
        let z = rows.last().unwrap()[3].as_f64().unwrap();
        assert!((z - 1.0).abs() < 1e-6);
        assert!(sim_json("loop", 1.0, 900.0, 0.0).is_err());
    }
}
