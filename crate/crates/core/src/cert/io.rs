//! Partition files (JSON lines) and measurement tables (CSV).
//!
//! The first line of a partition file is a header object with
//! `"type": "partition"`; every further line is one region with
//! `"type": "region"`, its halfspaces `A theta <= b` (row-major nested
//! arrays), working-set sequence, iteration count, status and witness.

use super::{
    CertError, CertStats, MeasurementVector, Partition, PartitionStatus, Region, RegionStatus,
};
use crate::poly::Polyhedron;
use crate::qp::WorkingSet;
use crate::table::{col, write_csv, FileHeader};
use crate::Checksum;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Partition {
        pqp_checksum: String,
        status: PartitionStatus,
        regions: usize,
        max_iterations: usize,
        theta_a: Vec<Vec<f64>>,
        theta_b: Vec<f64>,
        stats: CertStats,
    },
    Region {
        id: usize,
        path: String,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        ws_sequence: Vec<WorkingSet>,
        iterations: usize,
        status: RegionStatus,
        witness: Option<Vec<f64>>,
        radius: f64,
    },
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

fn matrix(rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>, CertError> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CertError::Parse("ragged halfspace matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

fn poly_from(a: &[Vec<f64>], b: Vec<f64>, d: usize) -> Result<Polyhedron, CertError> {
    Ok(Polyhedron::new(matrix(a, d)?, DVector::from_vec(b))?)
}

pub fn write_partition<W: Write>(mut out: W, p: &Partition) -> Result<(), CertError> {
    let head = Line::Partition {
        pqp_checksum: p.pqp_checksum.to_string(),
        status: p.status,
        regions: p.regions.len(),
        max_iterations: p.max_iterations(),
        theta_a: rows(&p.theta_set.a),
        theta_b: p.theta_set.b.iter().copied().collect(),
        stats: p.stats.clone(),
    };
    let json = |l: &Line| serde_json::to_string(l).map_err(|e| CertError::Parse(e.to_string()));
    writeln!(out, "{}", json(&head)?)?;
    for r in &p.regions {
        let line = Line::Region {
            id: r.id,
            path: r.path.clone(),
            a: rows(&r.poly.a),
            b: r.poly.b.iter().copied().collect(),
            ws_sequence: r.ws_sequence.clone(),
            iterations: r.iterations,
            status: r.status,
            witness: r.witness.as_ref().map(|w| w.iter().copied().collect()),
            radius: r.radius,
        };
        writeln!(out, "{}", json(&line)?)?;
    }
    Ok(())
}

pub fn read_partition<R: BufRead>(input: R) -> Result<Partition, CertError> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| CertError::Parse("empty partition file".into()))??;
    let head: Line = serde_json::from_str(&first).map_err(|e| CertError::Parse(e.to_string()))?;
    let Line::Partition {
        pqp_checksum,
        status,
        theta_a,
        theta_b,
        stats,
        ..
    } = head
    else {
        return Err(CertError::Parse(
            "first line must be the partition header".into(),
        ));
    };
    let d = theta_a.first().map_or(0, Vec::len);
    let theta_set = poly_from(&theta_a, theta_b, d)?;
    let checksum =
        u64::from_str_radix(&pqp_checksum, 16).map_err(|e| CertError::Parse(e.to_string()))?;
    let mut regions = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line).map_err(|e| CertError::Parse(e.to_string()))? {
            Line::Region {
                id,
                path,
                a,
                b,
                ws_sequence,
                iterations,
                status,
                witness,
                radius,
            } => regions.push(Region {
                id,
                path,
                poly: poly_from(&a, b, d)?,
                ws_sequence,
                iterations,
                status,
                witness: witness.map(DVector::from_vec),
                radius,
            }),
            Line::Partition { .. } => return Err(CertError::Parse("duplicate header".into())),
        }
    }
    Ok(Partition {
        regions,
        theta_set,
        pqp_checksum: Checksum(checksum),
        status,
        stats,
    })
}

/// Writes `region_id, tau, iterations, theta_0..` rows.
pub fn write_measurements<W: Write>(
    out: W,
    header: &FileHeader,
    mv: &MeasurementVector,
) -> Result<(), CertError> {
    let d = mv.thetas.first().map_or(0, |t| t.len());
    let mut cols = vec![
        col("region_id", "-"),
        col("tau", mv.mode.unit()),
        col("iterations", "-"),
    ];
    cols.extend((0..d).map(|k| col(format!("theta_{k}"), "-")));
    let data = (0..mv.len()).map(|k| {
        let mut row = vec![mv.region_ids[k] as f64, mv.tau[k], mv.iterations[k] as f64];
        row.extend(mv.thetas[k].iter().copied());
        row
    });
    write_csv(out, header, &cols, data)?;
    Ok(())
}
