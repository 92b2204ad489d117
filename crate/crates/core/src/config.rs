//! The OCP config file: model, weights, bounds, parameter set and solver
//! settings in one JSON document.
//!
//! ```json
//! {
//!   "name": "double_integrator",
//!   "model": { "kind": "double_integrator", "dt": 0.1 },
//!   "horizon": 2,
//!   "q": [1.0, 1.0],
//!   "r": [1.0],
//!   "input_lower": [-1.0],
//!   "input_upper": [1.0],
//!   "theta_lower": [-5.0, -5.0],
//!   "theta_upper": [5.0, 5.0]
//! }
//! ```
//!
//! Omitted fields take the defaults of the model. `r_preset` replaces `r`
//! by a multiple of the identity; `slice` restricts the parameter to a few
//! coordinates with the rest held fixed.

use crate::admm::AdmmSettings;
use crate::condense::{condense, riccati_terminal, CondenseError, OcpSpec, ParametricQP};
use crate::poly::{PolyError, Polyhedron};
use crate::qp::{QpError, SolverConfig};
use crate::sim::{linearize_hover, QuadParams, SimSettings, Trajectory};
use crate::Checksum;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Symmetric error-state box used for the quadrotor, in `[p, r, v, omega]`
/// order.
pub const THETA_B_UPPER: [f64; 12] = [0.6, 1.0, 0.6, 0.5, 0.4, 0.25, 1.6, 3.0, 0.2, 7.0, 5.0, 0.45];

/// Diagonal of the default quadrotor state weight.
pub const QUAD_Q: [f64; 12] = [
    100.0, 100.0, 100.0, 4.0, 4.0, 400.0, 4.0, 4.0, 4.0, 2.0408163, 2.0408163, 4.0,
];

pub const R_PRESETS: [f64; 3] = [900.0, 100.0, 50.0];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ocp(#[from] CondenseError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Position and velocity of a unit mass, zero-order hold.
    DoubleIntegrator { dt: f64 },
    /// Hover linearization of the quadrotor model.
    Quadrotor {
        dt: f64,
        #[serde(default)]
        params: QuadParams,
    },
    /// Row-major `F` and `G`.
    Custom { f: Vec<Vec<f64>>, g: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalWeight {
    /// Infinite-horizon Riccati solution.
    #[default]
    Riccati,
    /// Reuse the stage weight `Q`.
    Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub dims: Vec<usize>,
    /// Values of the other coordinates; zero when omitted.
    #[serde(default)]
    pub fixed: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcpConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    pub horizon: usize,
    /// Diagonal of `Q`; model default when omitted.
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub r: Option<Vec<f64>>,
    #[serde(default)]
    pub r_preset: Option<f64>,
    #[serde(default)]
    pub terminal: TerminalWeight,
    #[serde(default)]
    pub input_lower: Option<Vec<f64>>,
    #[serde(default)]
    pub input_upper: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_lower: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_upper: Option<Vec<f64>>,
    #[serde(default)]
    pub slice: Option<Slice>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub admm: AdmmSettings,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub trajectory: Option<Trajectory>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, ConfigError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
        return Err(ConfigError::Invalid(format!(
            "{what} must be a nonempty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

impl OcpConfig {
    /// Double integrator with `|u| <= 1`, `Q = I`, `R = 1`, `N = 2` over
    /// `[-5, 5]^2`.
    pub fn double_integrator() -> Self {
        Self {
            name: "double_integrator".into(),
            model: ModelSpec::DoubleIntegrator { dt: 0.1 },
            horizon: 2,
            q: Some(vec![1.0, 1.0]),
            r: Some(vec![1.0]),
            r_preset: None,
            terminal: TerminalWeight::Riccati,
            input_lower: Some(vec![-1.0]),
            input_upper: Some(vec![1.0]),
            theta_lower: Some(vec![-5.0, -5.0]),
            theta_upper: Some(vec![5.0, 5.0]),
            slice: None,
            solver: SolverConfig::default(),
            admm: AdmmSettings::default(),
            sim: SimSettings::default(),
            trajectory: None,
        }
    }

    /// Quadrotor at 500 Hz with `N = 15`, motor commands in `[0, 1]`.
    pub fn quadrotor() -> Self {
        Self {
            name: "quadrotor".into(),
            model: ModelSpec::Quadrotor {
                dt: 0.002,
                params: QuadParams::default(),
            },
            horizon: 15,
            q: None,
            r: None,
            r_preset: Some(900.0),
            input_lower: None,
            input_upper: None,
            theta_lower: None,
            theta_upper: None,
            trajectory: Some(Trajectory::default_steps()),
            ..Self::double_integrator()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String, ConfigError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn with_r_preset(mut self, r: f64) -> Self {
        self.r_preset = Some(r);
        self
    }

    /// Hash of the canonical serialization, written into output headers.
    pub fn hash(&self) -> Checksum {
        Checksum::of_bytes(serde_json::to_string(self).unwrap_or_default().as_bytes())
    }

    pub fn quad_params(&self) -> Option<&QuadParams> {
        match &self.model {
            ModelSpec::Quadrotor { params, .. } => Some(params),
            _ => None,
        }
    }

    fn dynamics(&self) -> Result<(DMatrix<f64>, DMatrix<f64>), ConfigError> {
        Ok(match &self.model {
            ModelSpec::DoubleIntegrator { dt } => {
                let dt = *dt;
                (
                    DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]),
                    DMatrix::from_row_slice(2, 1, &[dt * dt / 2.0, dt]),
                )
            }
            ModelSpec::Quadrotor { dt, params } => {
                params
                    .validate()
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                linearize_hover(params, *dt)
            }
            ModelSpec::Custom { f, g } => (matrix(f, "f")?, matrix(g, "g")?),
        })
    }

    fn input_bounds(&self, nu: usize) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = match self.quad_params() {
            Some(p) => {
                let u0 = p.hover_command();
                (vec![-u0; nu], vec![1.0 - u0; nu])
            }
            None => (vec![f64::NEG_INFINITY; nu], vec![f64::INFINITY; nu]),
        };
        (
            self.input_lower.clone().unwrap_or(lo),
            self.input_upper.clone().unwrap_or(hi),
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::Invalid("horizon must be at least 1".into()));
        }
        if let Some(r) = self.r_preset {
            if !(r > 0.0) {
                return Err(ConfigError::Invalid("r_preset must be positive".into()));
            }
        }
        let (f, g) = self.dynamics()?;
        let (nz, nu) = (f.nrows(), g.ncols());
        let check = |v: &Option<Vec<f64>>, len: usize, what: &str| match v {
            Some(v) if v.len() != len => Err(ConfigError::Invalid(format!(
                "{what} has length {}, expected {len}",
                v.len()
            ))),
            _ => Ok(()),
        };
        check(&self.q, nz, "q")?;
        check(&self.r, nu, "r")?;
        check(&self.input_lower, nu, "input_lower")?;
        check(&self.input_upper, nu, "input_upper")?;
        check(&self.theta_lower, nz, "theta_lower")?;
        check(&self.theta_upper, nz, "theta_upper")?;
        if let Some(s) = &self.slice {
            if s.dims.is_empty() || s.dims.iter().any(|&k| k >= nz) {
                return Err(ConfigError::Invalid("slice dims out of range".into()));
            }
            check(&s.fixed, nz, "slice.fixed")?;
        }
        Ok(())
    }

    /// The optimal control problem over the full state.
    pub fn ocp(&self) -> Result<OcpSpec, ConfigError> {
        self.validate()?;
        let (f, g) = self.dynamics()?;
        let (nz, nu) = (f.nrows(), g.ncols());
        let q_diag = match (&self.q, &self.model) {
            (Some(q), _) => q.clone(),
            (None, ModelSpec::Quadrotor { .. }) => QUAD_Q.to_vec(),
            (None, _) => vec![1.0; nz],
        };
        let q = DMatrix::from_diagonal(&DVector::from_vec(q_diag));
        let r = match (self.r_preset, &self.r) {
            (Some(v), _) => DMatrix::identity(nu, nu) * v,
            (None, Some(r)) => DMatrix::from_diagonal(&DVector::from_vec(r.clone())),
            (None, None) => DMatrix::identity(nu, nu),
        };
        let p = match self.terminal {
            TerminalWeight::Riccati => riccati_terminal(&f, &g, &q, &r)?,
            TerminalWeight::Stage => q.clone(),
        };
        let (lo, hi) = self.input_bounds(nu);
        let mut a_u = Vec::new();
        let mut b_u = Vec::new();
        for j in 0..nu {
            if hi[j].is_finite() {
                a_u.push((j, 1.0));
                b_u.push(hi[j]);
            }
            if lo[j].is_finite() {
                a_u.push((j, -1.0));
                b_u.push(-lo[j]);
            }
        }
        let mut a_u_m = DMatrix::zeros(a_u.len(), nu);
        for (row, &(j, s)) in a_u.iter().enumerate() {
            a_u_m[(row, j)] = s;
        }
        Ok(OcpSpec::new(
            f,
            g,
            q,
            r,
            p,
            self.horizon,
            DMatrix::zeros(a_u.len(), nz),
            a_u_m,
            DVector::from_vec(b_u),
            None,
        )?)
    }

    fn full_theta_box(&self, nz: usize) -> (Vec<f64>, Vec<f64>) {
        let default_hi = if self.quad_params().is_some() {
            THETA_B_UPPER.to_vec()
        } else {
            vec![1.0; nz]
        };
        let hi = self.theta_upper.clone().unwrap_or(default_hi);
        let lo = self
            .theta_lower
            .clone()
            .unwrap_or_else(|| hi.iter().map(|v| -v).collect());
        (lo, hi)
    }

    /// Parameter box restricted to the slice coordinates.
    pub fn theta_box(&self) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
        let (f, _) = self.dynamics()?;
        let (lo, hi) = self.full_theta_box(f.nrows());
        Ok(match &self.slice {
            Some(s) => (
                s.dims.iter().map(|&k| lo[k]).collect(),
                s.dims.iter().map(|&k| hi[k]).collect(),
            ),
            None => (lo, hi),
        })
    }

    pub fn theta_set(&self) -> Result<Polyhedron, ConfigError> {
        let (lo, hi) = self.theta_box()?;
        Ok(Polyhedron::from_box(&lo, &hi)?)
    }

    /// Condensed QP, restricted to the slice when one is configured.
    pub fn pqp(&self) -> Result<ParametricQP, ConfigError> {
        let full = condense(&self.ocp()?)?;
        Ok(match &self.slice {
            Some(s) => {
                let fixed = DVector::from_vec(
                    s.fixed
                        .clone()
                        .unwrap_or_else(|| vec![0.0; full.theta_dim()]),
                );
                full.slice(&s.dims, &fixed)?
            }
            None => full,
        })
    }

    /// Embeds a sliced parameter into the full state.
    pub fn embed(&self, theta: &DVector<f64>) -> DVector<f64> {
        match &self.slice {
            Some(s) => {
                let nz = s.fixed.as_ref().map_or_else(
                    || self.dynamics().map(|(f, _)| f.nrows()).unwrap_or(0),
                    Vec::len,
                );
                let mut full = DVector::from_vec(s.fixed.clone().unwrap_or_else(|| vec![0.0; nz]));
                for (i, &k) in s.dims.iter().enumerate() {
                    full[k] = theta[i];
                }
                full
            }
            None => theta.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrotor_defaults() {
        let cfg = OcpConfig::quadrotor();
        let pqp = cfg.pqp().unwrap();
        assert_eq!((pqp.n(), pqp.m(), pqp.theta_dim()), (60, 120, 12));
        let (lo, hi) = cfg.theta_box().unwrap();
        assert_eq!(hi, THETA_B_UPPER.to_vec());
        assert_eq!(lo[9], -7.0);
        let ocp = cfg.ocp().unwrap();
        assert_eq!(ocp.r[(0, 0)], 900.0);
        assert_ne!(cfg.hash(), cfg.clone().with_r_preset(100.0).hash());
    }

    #[test]
    fn json_round_trip_and_slice() {
        let mut cfg = OcpConfig::quadrotor();
        cfg.slice = Some(Slice {
            dims: vec![0, 6],
            fixed: None,
        });
        let back = OcpConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(back.pqp().unwrap().theta_dim(), 2);
        assert_eq!(back.theta_box().unwrap().1, vec![0.6, 1.6]);
        let full = back.embed(&DVector::from_vec(vec![0.1, 0.2]));
        assert_eq!((full.len(), full[0], full[6], full[1]), (12, 0.1, 0.2, 0.0));
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = OcpConfig::from_json(
            r#"{"model": {"kind": "double_integrator", "dt": 0.1}, "horizon": 3}"#,
        )
        .unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        // No bounds given: unconstrained.
        assert_eq!(cfg.pqp().unwrap().m(), 0);
        assert!(OcpConfig::from_json(
            r#"{"model": {"kind": "double_integrator", "dt": 0.1}, "horizon": 0}"#
        )
        .is_err());
        assert!(OcpConfig::from_json(
            r#"{"model": {"kind": "custom", "f": [[1]], "g": [[1]]}, "horizon": 1, "q": [1, 2]}"#
        )
        .is_err());
    }
}
