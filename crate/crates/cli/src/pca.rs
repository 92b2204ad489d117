use crate::context::{read_text, Context};
use crate::Outcome;
use anyhow::Result;
use mpc_cert::pca::{axis_aligned_box, build_pca_box, volume_ratio, StateLog};
use mpc_cert::table::{col, write_csv};
use nalgebra::DVector;
use std::io::Write;
use std::path::Path;

pub fn run(ctx: &Context, log_path: &Path, delta: f64, samples: usize) -> Result<Outcome> {
    let log = StateLog::read_csv(&read_text(log_path)?)?;
    let b = build_pca_box(&log, delta)?;
    let (lo, hi) = b.rotated_bounds();
    let flat = (&hi - &lo).iter().filter(|&&w| w == 0.0).count();
    if flat > 0 {
        log::warn!(
            "degenerate data: the box is flat in {flat} of {} directions",
            b.dim()
        );
    }
    std::fs::write(ctx.path("pca_box.json"), b.to_json()?)?;

    // Reference sets: the samples' own axis-aligned box, and the config's
    // parameter box when it has the log's dimension.
    let mut rows = Vec::new();
    let (alo, ahi) = axis_aligned_box(&log, delta)?;
    rows.push((0.0, volume_ratio(&b, &alo, &ahi, samples, ctx.seed)));
    let mut full = ctx.cfg.clone();
    full.slice = None;
    let (tlo, thi) = full.theta_box()?;
    if tlo.len() == b.dim() {
        let (tlo, thi) = (DVector::from_vec(tlo), DVector::from_vec(thi));
        rows.push((1.0, volume_ratio(&b, &tlo, &thi, samples, ctx.seed)));
    }
    let header = ctx
        .header("volume of the PCA box relative to reference boxes")
        .with_meta(
            "reference",
            "0 = sample bounding box, 1 = config parameter box",
        )
        .with_meta("delta", delta)
        .with_meta("log", log_path.display());
    let mut out = ctx.create("pca_report.csv")?;
    write_csv(
        &mut out,
        &header,
        &[
            col("reference", "-"),
            col("ratio_mc", "-"),
            col("ratio_exact", "-"),
            col("hit_reference", "-"),
            col("hit_pca", "-"),
            col("samples", "-"),
        ],
        rows.iter().map(|(r, v)| {
            vec![
                *r,
                v.monte_carlo,
                v.exact,
                v.hit_other,
                v.hit_pca,
                v.samples as f64,
            ]
        }),
    )?;
    out.flush()?;

    let contained = log.samples.iter().filter(|z| b.contains(z)).count();
    println!("{contained} of {} samples inside the box", log.len());
    for (r, v) in &rows {
        let name = if *r == 0.0 {
            "sample bounding box"
        } else {
            "parameter box"
        };
        println!(
            "volume ratio vs {name}: {:.4e} (Monte Carlo), {:.4e} (exact)",
            v.monte_carlo, v.exact
        );
    }
    Ok(Outcome::Done)
}
