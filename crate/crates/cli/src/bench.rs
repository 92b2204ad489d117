use crate::certify::partition;
use crate::context::{read_text, Context};
use crate::theta::ThetaSource;
use crate::{Outcome, SolverChoice};
use anyhow::{bail, Context as _, Result};
use mpc_cert::cert::{
    cdf_and_histogram, sample_uniform, write_measurements, CdfPoint, CostMode, MeasurementVector,
    PartitionStatus,
};
use mpc_cert::poly::Polyhedron;
use mpc_cert::table::{col, header_value, read_csv, write_csv};
use nalgebra::DVector;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Draws `count` points uniformly from `set` by rejection from its bounding
/// box.
fn sample_set(set: &Polyhedron, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let (lo, hi) = set.bounding_box()?;
    if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
        bail!("parameter set is unbounded");
    }
    let mut out = Vec::with_capacity(count);
    let mut round = 0;
    while out.len() < count {
        if round == 1000 {
            bail!(
                "rejection sampling accepted only {} of {count} points",
                out.len()
            );
        }
        let batch = sample_uniform(&lo, &hi, count, seed.wrapping_add(round));
        out.extend(
            batch
                .into_iter()
                .filter(|t| set.contains(t, 0.0))
                .take(count - out.len()),
        );
        round += 1;
    }
    Ok(out)
}

enum Sampling {
    Certified,
    Uniform { count: usize, seed: Option<u64> },
}

fn parse_sampling(s: &str) -> Result<Sampling> {
    if s == "certified" {
        return Ok(Sampling::Certified);
    }
    let mut parts = s.split(':');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("uniform"), Some(m), seed, None) => Ok(Sampling::Uniform {
            count: m.parse().with_context(|| format!("sample count {m:?}"))?,
            seed: seed.map(str::parse).transpose()?,
        }),
        _ => bail!("sampling must be `certified` or `uniform:<M>[:<seed>]`, got {s:?}"),
    }
}

fn read_tau(path: &Path) -> Result<MeasurementVector> {
    let text = read_text(path)?;
    let (names, rows) = read_csv(&text).map_err(anyhow::Error::msg)?;
    let idx = |n: &str| {
        names
            .iter()
            .position(|c| c == n)
            .with_context(|| format!("{} has no {n} column", path.display()))
    };
    let (id, tau, it) = (idx("region_id")?, idx("tau")?, idx("iterations")?);
    let mode = match header_value(&text, "units") {
        Some(u) if u.contains("tau [ns]") => CostMode::Wallclock,
        _ => CostMode::Flops,
    };
    Ok(MeasurementVector {
        mode,
        region_ids: rows.iter().map(|r| r[id] as usize).collect(),
        tau: rows.iter().map(|r| r[tau]).collect(),
        iterations: rows.iter().map(|r| r[it] as usize).collect(),
        thetas: rows
            .iter()
            .map(|r| DVector::from_iterator(r.len() - 3, r[3..].iter().copied()))
            .collect(),
    })
}

fn write_cdf(ctx: &Context, name: &str, unit: &str, cdf: &[CdfPoint]) -> Result<()> {
    let mut out = ctx.create(&format!("cdf_{name}.csv"))?;
    write_csv(
        &mut out,
        &ctx.header(&format!("empirical CDF of {name} cost")),
        &[col("value", unit), col("fraction", "-")],
        cdf.iter().map(|p| vec![p.value, p.fraction]),
    )?;
    out.flush()?;
    Ok(())
}

pub fn run(
    ctx: &Context,
    theta: &ThetaSource,
    sampling: &str,
    bins: usize,
    files: Option<(PathBuf, PathBuf)>,
) -> Result<Outcome> {
    let mut outcome = Outcome::Done;
    let (names, a, b) = match files {
        Some((fa, fb)) => ("a b", read_tau(&fa)?, read_tau(&fb)?),
        None => {
            if ctx.solvers(SolverChoice::Both).len() != 2 {
                bail!("bench compares two solvers: use --solver both or give --tau-a and --tau-b");
            }
            let (points, ids) = match parse_sampling(sampling)? {
                Sampling::Certified => {
                    let part = partition(ctx, theta)?;
                    if part.status == PartitionStatus::BudgetExceeded {
                        outcome = Outcome::Partial;
                    }
                    part.regions
                        .iter()
                        .filter_map(|r| r.witness.clone().map(|w| (w, r.id)))
                        .unzip()
                }
                Sampling::Uniform { count, seed } => {
                    let d = ctx.cfg.pqp()?.theta_dim();
                    let set = theta.resolve(ctx, d)?;
                    let pts = sample_set(&set, count, seed.unwrap_or(ctx.seed))?;
                    let ids: Vec<usize> = (0..pts.len()).collect();
                    (pts, ids)
                }
            };
            let run = |name: &str| -> Result<MeasurementVector> {
                let mut tau = ctx.measure(name, &points)?;
                tau.region_ids = ids.clone();
                let mut out = ctx.create(&format!("tau_{name}.csv"))?;
                let header = ctx
                    .header(&format!("{name} cost per sample"))
                    .with_meta("solver", name)
                    .with_meta("sampling", sampling);
                write_measurements(&mut out, &header, &tau)?;
                out.flush()?;
                Ok(tau)
            };
            ("daqp admm", run("daqp")?, run("admm")?)
        }
    };
    let (name_a, name_b) = names.split_once(' ').unwrap();
    let unit = a.mode.unit();
    let tables = cdf_and_histogram(&a, &b, bins)?;

    let mut out = ctx.create("differences.csv")?;
    write_csv(
        &mut out,
        &ctx.header(&format!("{name_b} cost minus {name_a} cost per sample")),
        &[col("region_id", "-"), col("difference", unit)],
        a.region_ids
            .iter()
            .zip(&tables.differences)
            .map(|(&id, &d)| vec![id as f64, d]),
    )?;
    out.flush()?;
    let mut out = ctx.create("histogram.csv")?;
    write_csv(
        &mut out,
        &ctx.header(&format!("histogram of {name_b} minus {name_a} cost")),
        &[col("lo", unit), col("hi", unit), col("count", "-")],
        tables
            .histogram
            .iter()
            .map(|h| vec![h.lo, h.hi, h.count as f64]),
    )?;
    out.flush()?;
    write_cdf(ctx, name_a, unit, &tables.cdf_a)?;
    write_cdf(ctx, name_b, unit, &tables.cdf_b)?;

    let max_it = |m: &MeasurementVector| m.iterations.iter().copied().max().unwrap_or(0);
    println!(
        "{} samples; {name_a} cheaper than {name_b} in {:.1}% of them",
        a.len(),
        100.0 * tables.fraction_positive
    );
    println!(
        "max iterations: {name_a} {}, {name_b} {}",
        max_it(&a),
        max_it(&b)
    );
    Ok(outcome)
}
