use super::dynamics::NZ;
use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};

/// Reference generator sampled as a 12-state `z_r(t)`; attitude and body
/// rate references are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Hover {
        position: [f64; 3],
    },
    /// Piecewise-constant waypoints, each held for `hold` seconds.
    StepSequence {
        waypoints: Vec<[f64; 3]>,
        hold: f64,
    },
    /// `x = A sin(wt)`, `y = A/2 sin(2wt)` at constant altitude.
    FigureEight {
        amplitude: f64,
        period: f64,
        altitude: f64,
    },
}

impl Trajectory {
    /// Start at 1 m altitude, then 1 m along +x, 0.5 m up and back
    /// diagonally to the start; the first hold is half as long.
    pub fn default_steps() -> Self {
        Trajectory::StepSequence {
            waypoints: vec![
                [0.0, 0.0, 1.0],
                [1.0, 0.0, 1.0],
                [1.0, 0.0, 1.5],
                [0.0, 0.0, 1.0],
            ],
            hold: 4.0,
        }
    }

    pub fn default_figure_eight() -> Self {
        Trajectory::FigureEight {
            amplitude: 0.5,
            period: 8.0,
            altitude: 1.0,
        }
    }

    /// Start time of waypoint `k` of a step sequence.
    pub fn step_start(&self, k: usize) -> Option<f64> {
        match self {
            Trajectory::StepSequence { waypoints, hold } if k < waypoints.len() => {
                Some(if k == 0 { 0.0 } else { hold * (k as f64 - 0.5) })
            }
            _ => None,
        }
    }

    /// Natural run length of the reference.
    pub fn duration(&self) -> f64 {
        match self {
            Trajectory::Hover { .. } => 10.0,
            Trajectory::StepSequence { waypoints, hold } => hold * (waypoints.len() as f64 - 0.5),
            Trajectory::FigureEight { period, .. } => 2.0 * period,
        }
    }

    pub fn initial_position(&self) -> Vector3<f64> {
        self.position(0.0)
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        self.sample(t).fixed_rows::<3>(0).into_owned()
    }

    pub fn sample(&self, t: f64) -> SVector<f64, NZ> {
        let mut z = SVector::<f64, NZ>::zeros();
        match self {
            Trajectory::Hover { position } => z.fixed_rows_mut::<3>(0).copy_from_slice(position),
            Trajectory::StepSequence { waypoints, .. } => {
                let mut k = 0;
                while k + 1 < waypoints.len() && self.step_start(k + 1).is_some_and(|s| t >= s) {
                    k += 1;
                }
                if let Some(w) = waypoints.get(k) {
                    z.fixed_rows_mut::<3>(0).copy_from_slice(w);
                }
            }
            Trajectory::FigureEight {
                amplitude,
                period,
                altitude,
            } => {
                let w = 2.0 * std::f64::consts::PI / period;
                z[0] = amplitude * (w * t).sin();
                z[1] = amplitude / 2.0 * (2.0 * w * t).sin();
                z[2] = *altitude;
                z[6] = amplitude * w * (w * t).cos();
                z[7] = amplitude * w * (2.0 * w * t).cos();
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_schedule() {
        let t = Trajectory::default_steps();
        assert_eq!(t.duration(), 14.0);
        assert_eq!(t.position(1.9), Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(t.position(2.0), Vector3::new(1.0, 0.0, 1.0));
        assert_eq!(t.position(7.0), Vector3::new(1.0, 0.0, 1.5));
        assert_eq!(t.position(13.9), Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(t.step_start(3), Some(10.0));
    }

    #[test]
    fn figure_eight_velocity_matches_position() {
        let t = Trajectory::default_figure_eight();
        let h = 1e-6;
        let fd = (t.position(1.3 + h) - t.position(1.3 - h)) / (2.0 * h);
        let v = t.sample(1.3).fixed_rows::<3>(6).into_owned();
        assert!((fd - v).amax() < 1e-6);
        assert_eq!(t.position(0.0), Vector3::new(0.0, 0.0, 1.0));
    }
}
