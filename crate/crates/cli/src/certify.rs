use crate::context::Context;
use crate::theta::ThetaSource;
use crate::{Outcome, SolverChoice};
use anyhow::Result;
use mpc_cert::cert::{
    certify, wcet, write_measurements, write_partition, CertOptions, Partition, PartitionStatus,
};
use mpc_cert::table::{col, write_csv};
use std::io::Write;

pub fn options(ctx: &Context) -> CertOptions {
    let mut opts = CertOptions::default();
    if let Some(b) = ctx.budget {
        opts.region_budget = b as usize;
    }
    opts
}

/// Certifies `theta` and writes the partition file.
pub fn partition(ctx: &Context, theta: &ThetaSource) -> Result<Partition> {
    let pqp = ctx.cfg.pqp()?;
    let set = theta.resolve(ctx, pqp.theta_dim())?;
    let part = certify(&pqp, &set, &ctx.cfg.solver, &options(ctx))?;
    let mut out = ctx.create("partition.jsonl")?;
    write_partition(&mut out, &part)?;
    out.flush()?;
    Ok(part)
}

pub fn status_name(s: PartitionStatus) -> &'static str {
    match s {
        PartitionStatus::Complete => "complete",
        PartitionStatus::BudgetExceeded => "region budget exceeded",
    }
}

pub fn run(ctx: &Context, theta: &ThetaSource) -> Result<Outcome> {
    let part = partition(ctx, theta)?;
    let unit = ctx.mode.unit();
    let witnesses: Vec<_> = part
        .regions
        .iter()
        .filter_map(|r| r.witness.clone())
        .collect();
    let ids: Vec<_> = part
        .regions
        .iter()
        .filter(|r| r.witness.is_some())
        .map(|r| r.id)
        .collect();

    let mut summary = Vec::new();
    for (k, name) in ctx.solvers(SolverChoice::Daqp).into_iter().enumerate() {
        let mut tau = ctx.measure(name, &witnesses)?;
        tau.region_ids = ids.clone();
        let header = ctx
            .header(&format!("{name} cost at region witnesses"))
            .with_meta("solver", name);
        let mut out = ctx.create(&format!("tau_{name}.csv"))?;
        write_measurements(&mut out, &header, &tau)?;
        out.flush()?;
        let (worst, id) = wcet(&tau)?;
        println!(
            "{name}: WCET {worst} {unit} in region {id} ({} iterations)",
            part.regions[id].iterations
        );
        summary.push(vec![
            k as f64,
            worst,
            id as f64,
            part.regions[id].iterations as f64,
        ]);
    }

    let header = ctx
        .header("worst-case cost over the certified partition")
        .with_meta("status", status_name(part.status))
        .with_meta("regions", part.regions.len())
        .with_meta("max_iterations", part.max_iterations())
        .with_meta("iteration_capped_regions", part.capped_count())
        .with_meta("degenerate_regions", part.stats.slivers)
        .with_meta("solvers", ctx.solvers(SolverChoice::Daqp).join(" "));
    let cols = [
        col("solver", "index into solvers"),
        col("wcet", unit),
        col("region_id", "-"),
        col("iterations", "-"),
    ];
    let mut out = ctx.create("wcet.csv")?;
    write_csv(&mut out, &header, &cols, summary)?;
    out.flush()?;

    let splits = if part.regions.len() == 1 {
        " (no splits)"
    } else {
        ""
    };
    println!(
        "{} regions{splits}, max {} iterations, {} iteration-capped, status {}",
        part.regions.len(),
        part.max_iterations(),
        part.capped_count(),
        status_name(part.status)
    );
    Ok(
        if part.status == PartitionStatus::BudgetExceeded || part.capped_count() > 0 {
            Outcome::Partial
        } else {
            Outcome::Done
        },
    )
}
