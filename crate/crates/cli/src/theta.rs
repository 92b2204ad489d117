//! Where the parameter set comes from.

use crate::context::{read_text, Context};
use anyhow::{anyhow, bail, Result};
use mpc_cert::pca::{box_to_polyhedron, build_pca_box, PcaBox, StateLog};
use mpc_cert::poly::Polyhedron;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSource {
    /// The config's parameter box.
    Box,
    /// PCA box built from a logged error-state series.
    Pca { log: PathBuf, delta: f64 },
    /// A saved PCA box.
    PcaBox(PathBuf),
    /// `{"a": [[..], ..], "b": [..]}`.
    Poly(PathBuf),
}

impl FromStr for ThetaSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "box" {
            return Ok(Self::Box);
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("unknown parameter set {s:?}"))?;
        match kind {
            "pca" => {
                let (log, delta) = rest
                    .rsplit_once(':')
                    .ok_or("expected pca:<log.csv>:<delta>")?;
                let delta = delta.parse().map_err(|e| format!("delta {delta:?}: {e}"))?;
                Ok(Self::Pca {
                    log: log.into(),
                    delta,
                })
            }
            "pcabox" => Ok(Self::PcaBox(rest.into())),
            "poly" => Ok(Self::Poly(rest.into())),
            _ => Err(format!("unknown parameter set kind {kind:?}")),
        }
    }
}

#[derive(Deserialize)]
struct PolyFile {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

/// Restricts 12-d logs to the configured slice so they match the problem.
fn fit_log(ctx: &Context, mut log: StateLog, d: usize) -> Result<StateLog> {
    if log.dim() != d {
        match &ctx.cfg.slice {
            Some(s) if s.dims.len() == d => {
                log.samples = log
                    .samples
                    .iter()
                    .map(|z| DVector::from_iterator(d, s.dims.iter().map(|&k| z[k])))
                    .collect();
            }
            _ => bail!("log has dimension {}, the problem expects {d}", log.dim()),
        }
    }
    Ok(log)
}

impl ThetaSource {
    pub fn resolve(&self, ctx: &Context, d: usize) -> Result<Polyhedron> {
        let poly = match self {
            Self::Box => ctx.cfg.theta_set()?,
            Self::Pca { log, delta } => {
                let log = fit_log(ctx, StateLog::read_csv(&read_text(log)?)?, d)?;
                box_to_polyhedron(&build_pca_box(&log, *delta)?)
            }
            Self::PcaBox(path) => box_to_polyhedron(&PcaBox::from_json(&read_text(path)?)?),
            Self::Poly(path) => {
                let f: PolyFile = serde_json::from_str(&read_text(path)?)?;
                let cols = f.a.first().map_or(0, Vec::len);
                if f.a.len() != f.b.len() || f.a.iter().any(|r| r.len() != cols) {
                    bail!("polyhedron rows do not match b");
                }
                Polyhedron::new(
                    DMatrix::from_fn(f.a.len(), cols, |r, c| f.a[r][c]),
                    DVector::from_vec(f.b),
                )
                .map_err(|e| anyhow!(e))?
            }
        };
        if poly.dim() != d {
            bail!(
                "parameter set has dimension {}, the problem expects {d}",
                poly.dim()
            );
        }
        Ok(poly)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sources() {
        assert_eq!("box".parse::<ThetaSource>().unwrap(), ThetaSource::Box);
        assert_eq!(
            "pca:runs/a:b.csv:2.5".parse::<ThetaSource>().unwrap(),
            ThetaSource::Pca {
                log: "runs/a:b.csv".into(),
                delta: 2.5
            }
        );
        assert_eq!(
            "poly:p.json".parse::<ThetaSource>().unwrap(),
            ThetaSource::Poly("p.json".into())
        );
        assert!("pca:log.csv".parse::<ThetaSource>().is_err());
        assert!("ball".parse::<ThetaSource>().is_err());
    }
}
