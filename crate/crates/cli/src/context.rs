use crate::{Cli, Mode, SolverChoice};
use anyhow::{bail, Context as _, Result};
use mpc_cert::admm::{admm_solve, build_admm_cache, AdmmCache};
use mpc_cert::cert::{
    measure_points, CertError, CostMode, DaqpProgram, MeasurementVector, Program, RunCost,
};
use mpc_cert::condense::MpcController;
use mpc_cert::config::OcpConfig;
use mpc_cert::table::FileHeader;
use nalgebra::DVector;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Settings shared by every command.
pub struct Context {
    pub cfg: OcpConfig,
    pub hash: String,
    pub out: PathBuf,
    pub seed: u64,
    pub mode: CostMode,
    pub budget: Option<u64>,
    pub solver: Option<SolverChoice>,
    pub workers: usize,
    stamp: String,
}

pub fn load_config(spec: &str) -> Result<OcpConfig> {
    Ok(match spec {
        "double-integrator" => OcpConfig::double_integrator(),
        "quadrotor" => OcpConfig::quadrotor(),
        path => OcpConfig::load(path).with_context(|| format!("loading config {path}"))?,
    })
}

fn timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<u64>().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        });
    format!("unix {secs}")
}

impl Context {
    pub fn new(cli: &Cli) -> Result<Self> {
        let mut cfg = load_config(&cli.config)?;
        if let Some(r) = &cli.r_preset {
            cfg = cfg.with_r_preset(r.parse()?);
        }
        cfg.sim.seed = cli.seed;
        cfg.validate()?;
        let mode = match cli.mode {
            Mode::Flops => CostMode::Flops,
            Mode::Wallclock => CostMode::Wallclock,
        };
        let workers = match mode {
            // Timing runs must not compete for cores.
            CostMode::Wallclock => 1,
            CostMode::Flops => cli
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
                .max(1),
        };
        fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
        Ok(Self {
            hash: cfg.hash().to_string(),
            cfg,
            out: cli.out.clone(),
            seed: cli.seed,
            mode,
            budget: cli.budget,
            solver: cli.solver,
            workers,
            stamp: timestamp(),
        })
    }

    pub fn header(&self, title: &str) -> FileHeader {
        FileHeader::new(title, &self.hash).with_timestamp(&self.stamp)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    /// Solver names to run, `default` when none was given.
    pub fn solvers(&self, default: SolverChoice) -> Vec<&'static str> {
        match self.solver.unwrap_or(default) {
            SolverChoice::Daqp => vec!["daqp"],
            SolverChoice::Admm => vec!["admm"],
            SolverChoice::Both => vec!["daqp", "admm"],
        }
    }

    /// A fresh program for `name` on the (possibly sliced) parameter.
    pub fn program(&self, name: &str) -> Result<Box<dyn Program + Send>> {
        Ok(match name {
            "daqp" => Box::new(DaqpProgram::new(
                MpcController::new(self.cfg.pqp()?)?,
                self.cfg.solver.clone(),
            )),
            "admm" => Box::new(SlicedAdmm {
                cache: build_admm_cache(&self.cfg.ocp()?, &self.cfg.admm)?,
                cfg: self.cfg.clone(),
            }),
            other => bail!("unknown solver {other}"),
        })
    }

    /// Runs `name` at every point, split over the worker threads. Results
    /// keep the order of `points`.
    pub fn measure(&self, name: &str, points: &[DVector<f64>]) -> Result<MeasurementVector> {
        if points.is_empty() {
            bail!("nothing to measure");
        }
        let chunk = points.len().div_ceil(self.workers);
        let programs = (0..points.len().div_ceil(chunk))
            .map(|_| self.program(name))
            .collect::<Result<Vec<_>>>()?;
        let parts: Vec<Result<MeasurementVector, CertError>> = std::thread::scope(|s| {
            let handles: Vec<_> = points
                .chunks(chunk)
                .zip(programs)
                .map(|(pts, mut prog)| {
                    let mode = self.mode;
                    s.spawn(move || measure_points(pts, prog.as_mut(), mode))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("measurement thread panicked"))
                .collect()
        });
        let mut out = MeasurementVector {
            mode: self.mode,
            region_ids: Vec::new(),
            tau: Vec::new(),
            iterations: Vec::new(),
            thetas: Vec::new(),
        };
        for part in parts {
            let part = part?;
            let offset = out.tau.len();
            out.region_ids
                .extend(part.region_ids.iter().map(|k| k + offset));
            out.tau.extend(part.tau);
            out.iterations.extend(part.iterations);
            out.thetas.extend(part.thetas);
        }
        Ok(out)
    }
}

/// ADMM works on the full state; sliced parameters are embedded first.
struct SlicedAdmm {
    cache: AdmmCache,
    cfg: OcpConfig,
}

impl Program for SlicedAdmm {
    fn name(&self) -> &str {
        "admm"
    }

    fn run(&mut self, theta: &DVector<f64>) -> Result<RunCost, CertError> {
        let t = admm_solve(&self.cache, &self.cfg.embed(theta))
            .map_err(|e| CertError::Program(e.to_string()))?;
        Ok(RunCost {
            flops: t.flop_estimate,
            iterations: t.iterations,
        })
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
