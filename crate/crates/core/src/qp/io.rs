//! QP problem files.
//!
//! A problem is stored as one JSON object:
//!
//! ```json
//! {"n": 2, "m": 1, "H": [1.0, 0.0, 0.0, 1.0], "f": [-2.0, 0.0], "A": [1.0, 0.0], "b": [1.0]}
//! ```
//!
//! `H` (`n*n` entries) and `A` (`m*n` entries) are row-major. Floats are
//! written in shortest round-trip form, so loading a saved file reproduces
//! the problem bit for bit.

use super::{DenseQP, QpError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct QpFile {
    n: usize,
    m: usize,
    H: Vec<f64>,
    f: Vec<f64>,
    A: Vec<f64>,
    b: Vec<f64>,
}

pub fn to_json(qp: &DenseQP) -> String {
    let file = QpFile {
        n: qp.n(),
        m: qp.m(),
        H: qp.h.transpose().iter().copied().collect(),
        f: qp.f.iter().copied().collect(),
        A: qp.a.transpose().iter().copied().collect(),
        b: qp.b.iter().copied().collect(),
    };
    serde_json::to_string(&file).expect("plain numeric data serializes")
}

pub fn from_json(text: &str) -> Result<DenseQP, QpError> {
    let file: QpFile = serde_json::from_str(text).map_err(|e| QpError::Parse(e.to_string()))?;
    let (n, m) = (file.n, file.m);
    if file.H.len() != n * n || file.f.len() != n || file.A.len() != m * n || file.b.len() != m {
        return Err(QpError::DimensionMismatch(format!(
            "array lengths do not match n={n}, m={m}"
        )));
    }
    DenseQP::new(
        DMatrix::from_row_slice(n, n, &file.H),
        DVector::from_vec(file.f),
        DMatrix::from_row_slice(m, n, &file.A),
        DVector::from_vec(file.b),
    )
}

pub fn save(qp: &DenseQP, path: impl AsRef<Path>) -> Result<(), QpError> {
    std::fs::write(path, to_json(qp) + "\n")?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<DenseQP, QpError> {
    from_json(&std::fs::read_to_string(path)?)
}
