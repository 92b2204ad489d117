use super::{CertError, Partition};
use crate::admm::{admm_solve, AdmmCache};
use crate::condense::MpcController;
use crate::qp::SolverConfig;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    Flops,
    Wallclock,
}

impl CostMode {
    pub fn unit(self) -> &'static str {
        match self {
            CostMode::Flops => "flops",
            CostMode::Wallclock => "ns",
        }
    }
}

/// Cost of one run of a solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunCost {
    pub flops: u64,
    pub iterations: usize,
}

/// Something that can be executed at a parameter value.
pub trait Program {
    fn name(&self) -> &str;
    fn run(&mut self, theta: &DVector<f64>) -> Result<RunCost, CertError>;
}

pub struct DaqpProgram {
    controller: MpcController,
    cfg: SolverConfig,
}

impl DaqpProgram {
    pub fn new(controller: MpcController, cfg: SolverConfig) -> Self {
        Self { controller, cfg }
    }
}

impl Program for DaqpProgram {
    fn name(&self) -> &str {
        "daqp"
    }

    fn run(&mut self, theta: &DVector<f64>) -> Result<RunCost, CertError> {
        let step = self.controller.step(theta, &self.cfg)?;
        Ok(RunCost {
            flops: step.trace.flop_estimate,
            iterations: step.trace.iterations,
        })
    }
}

pub struct AdmmProgram {
    cache: AdmmCache,
}

impl AdmmProgram {
    pub fn new(cache: AdmmCache) -> Self {
        Self { cache }
    }
}

impl Program for AdmmProgram {
    fn name(&self) -> &str {
        "admm"
    }

    fn run(&mut self, theta: &DVector<f64>) -> Result<RunCost, CertError> {
        let t = admm_solve(&self.cache, theta).map_err(|e| CertError::Program(e.to_string()))?;
        Ok(RunCost {
            flops: t.flop_estimate,
            iterations: t.iterations,
        })
    }
}

/// Per-sample costs, one entry per region (or per sample point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector {
    pub mode: CostMode,
    pub region_ids: Vec<usize>,
    pub tau: Vec<f64>,
    pub iterations: Vec<usize>,
    pub thetas: Vec<DVector<f64>>,
}

impl MeasurementVector {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }
}

const WALLCLOCK_REPEATS: usize = 5;

fn run_one(
    program: &mut dyn Program,
    theta: &DVector<f64>,
    mode: CostMode,
) -> Result<(f64, usize), CertError> {
    match mode {
        CostMode::Flops => {
            let c = program.run(theta)?;
            Ok((c.flops as f64, c.iterations))
        }
        CostMode::Wallclock => {
            let mut best = f64::INFINITY;
            let mut iters = 0;
            for _ in 0..WALLCLOCK_REPEATS {
                let start = Instant::now();
                let c = program.run(theta)?;
                best = best.min(start.elapsed().as_nanos() as f64);
                iters = c.iterations;
            }
            Ok((best, iters))
        }
    }
}

/// Runs `program` at each region's witness. Regions without a witness are
/// skipped with a warning.
pub fn measure(
    partition: &Partition,
    program: &mut dyn Program,
    mode: CostMode,
) -> Result<MeasurementVector, CertError> {
    let mut out = MeasurementVector {
        mode,
        region_ids: Vec::new(),
        tau: Vec::new(),
        iterations: Vec::new(),
        thetas: Vec::new(),
    };
    for r in &partition.regions {
        let Some(theta) = &r.witness else {
            log::warn!("region {} has no witness; skipped", r.id);
            continue;
        };
        let (tau, iters) = run_one(program, theta, mode)?;
        out.region_ids.push(r.id);
        out.tau.push(tau);
        out.iterations.push(iters);
        out.thetas.push(theta.clone());
    }
    Ok(out)
}

/// Runs `program` at each point; ids are sample indices.
pub fn measure_points(
    points: &[DVector<f64>],
    program: &mut dyn Program,
    mode: CostMode,
) -> Result<MeasurementVector, CertError> {
    let mut out = MeasurementVector {
        mode,
        region_ids: Vec::with_capacity(points.len()),
        tau: Vec::with_capacity(points.len()),
        iterations: Vec::with_capacity(points.len()),
        thetas: points.to_vec(),
    };
    for (k, theta) in points.iter().enumerate() {
        let (tau, iters) = run_one(program, theta, mode)?;
        out.region_ids.push(k);
        out.tau.push(tau);
        out.iterations.push(iters);
    }
    Ok(out)
}

/// Largest cost and the id where it occurs (first on ties).
pub fn wcet(tau: &MeasurementVector) -> Result<(f64, usize), CertError> {
    let mut best: Option<(f64, usize)> = None;
    for (k, &t) in tau.tau.iter().enumerate() {
        if best.is_none_or(|(b, _)| t > b) {
            best = Some((t, tau.region_ids[k]));
        }
    }
    best.ok_or(CertError::EmptyMeasurement)
}

/// `count` i.i.d. uniform samples from the box `[lo, hi]`.
pub fn sample_uniform(lo: &[f64], hi: &[f64], count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            DVector::from_iterator(
                lo.len(),
                lo.iter()
                    .zip(hi)
                    .map(|(&a, &b)| if a < b { rng.gen_range(a..=b) } else { a }),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTables {
    /// `tau_b - tau_a` per sample.
    pub differences: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
    pub cdf_a: Vec<CdfPoint>,
    pub cdf_b: Vec<CdfPoint>,
    /// Fraction of samples with `tau_b > tau_a`.
    pub fraction_positive: f64,
}

/// Equal-width histogram of `b - a` over `[min, max]`. A constant
/// difference gives a single zero-width bin.
pub fn difference_histogram(
    a: &[f64],
    b: &[f64],
    bins: usize,
) -> Result<Vec<HistogramBin>, CertError> {
    if a.len() != b.len() {
        return Err(CertError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(CertError::EmptyMeasurement);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max || bins <= 1 {
        return Ok(vec![HistogramBin {
            lo: min,
            hi: max,
            count: diffs.len(),
        }]);
    }
    let width = (max - min) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            lo: min + k as f64 * width,
            hi: if k + 1 == bins {
                max
            } else {
                min + (k + 1) as f64 * width
            },
            count: 0,
        })
        .collect();
    for v in diffs {
        let k = (((v - min) / width) as usize).min(bins - 1);
        out[k].count += 1;
    }
    Ok(out)
}

/// Empirical CDF at each distinct value.
pub fn empirical_cdf(tau: &[f64]) -> Vec<CdfPoint> {
    let mut v = tau.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (k, &x) in v.iter().enumerate() {
        let fraction = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(p) if p.value == x => p.fraction = fraction,
            _ => out.push(CdfPoint { value: x, fraction }),
        }
    }
    out
}

pub fn cdf_and_histogram(
    tau_a: &MeasurementVector,
    tau_b: &MeasurementVector,
    bins: usize,
) -> Result<BenchTables, CertError> {
    let histogram = difference_histogram(&tau_a.tau, &tau_b.tau, bins)?;
    let differences: Vec<f64> = tau_a
        .tau
        .iter()
        .zip(&tau_b.tau)
        .map(|(x, y)| y - x)
        .collect();
    let positive = differences.iter().filter(|&&d| d > 0.0).count();
    Ok(BenchTables {
        fraction_positive: positive as f64 / differences.len() as f64,
        differences,
        histogram,
        cdf_a: empirical_cdf(&tau_a.tau),
        cdf_b: empirical_cdf(&tau_b.tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(tau: Vec<f64>) -> MeasurementVector {
        MeasurementVector {
            mode: CostMode::Flops,
            region_ids: (0..tau.len()).collect(),
            iterations: vec![0; tau.len()],
            thetas: vec![DVector::zeros(1); tau.len()],
            tau,
        }
    }

    #[test]
    fn wcet_examples() {
        assert_eq!(wcet(&mv(vec![3.0])).unwrap(), (3.0, 0));
        let mut m = mv(vec![1.0, 5.0, 2.0]);
        m.region_ids = vec![1, 2, 3];
        assert_eq!(wcet(&m).unwrap(), (5.0, 2));
        assert!(matches!(
            wcet(&mv(vec![])),
            Err(CertError::EmptyMeasurement)
        ));
    }

    #[test]
    fn uniform_samples() {
        let s = sample_uniform(&[1.0, 2.0], &[1.0, 2.0], 5, 3);
        assert!(s.iter().all(|p| p[0] == 1.0 && p[1] == 2.0));
        let a = sample_uniform(&[0.0], &[1.0], 100_000, 9);
        let mean = a.iter().map(|p| p[0]).sum::<f64>() / a.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
        assert_eq!(a, sample_uniform(&[0.0], &[1.0], 100_000, 9));
    }

    #[test]
    fn histogram_and_cdf() {
        let a = mv(vec![1.0, 2.0, 3.0, 3.0]);
        let t = cdf_and_histogram(&a, &a, 10).unwrap();
        assert_eq!(t.histogram.len(), 1);
        assert_eq!((t.histogram[0].lo, t.histogram[0].count), (0.0, 4));
        let b = mv(vec![2.0, 3.0, 4.0, 4.0]);
        let t = cdf_and_histogram(&a, &b, 10).unwrap();
        assert!(t.differences.iter().all(|&d| d == 1.0));
        assert_eq!(t.fraction_positive, 1.0);
        let cdf = &t.cdf_a;
        assert!(cdf
            .windows(2)
            .all(|w| w[0].fraction <= w[1].fraction && w[0].value < w[1].value));
        assert_eq!(cdf.last().unwrap().fraction, 1.0);
        assert!(cdf_and_histogram(&a, &mv(vec![1.0]), 10).is_err());
    }

    #[test]
    fn histogram_bins_cover_range() {
        let h = difference_histogram(&[0.0; 5], &[0.0, 1.0, 2.0, 3.0, 4.0], 4).unwrap();
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
        assert_eq!(h[3].count, 2);
    }
}
