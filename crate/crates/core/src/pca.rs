//! Rotated hyper-rectangles fitted to logged error states.
//!
//! With `mu` the sample mean and `U` the left singular vectors of the
//! centered data, rotated coordinates are `z~ = U'(z - mu)`. The box keeps
//! the per-coordinate range `[lo, hi]` of the rotated samples, widened by
//! `delta * (hi - lo)` on each side:
//!
//! ```text
//! [ U']        [  hi' + U' mu ]
//! [-U'] z  <=  [ -lo' - U' mu ]
//! ```
//!
//! Both bounds are taken in rotated coordinates, which is what makes every
//! sample lie inside the box.

use crate::poly::Polyhedron;
use crate::table::{col, header_value, read_csv, write_csv, Column, FileHeader};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

/// Boundary tolerance of [`PcaBox::contains`].
pub const CONTAINS_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples have inconsistent dimensions")]
    DimensionMismatch,
    #[error("non-finite sample or margin")]
    NonFinite,
    #[error("margin must be nonnegative, got {0}")]
    NegativeMargin(f64),
    #[error("could not parse state log: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Error states sampled at `rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLog {
    pub samples: Vec<DVector<f64>>,
    pub rate_hz: f64,
    pub source: String,
}

const ERROR_STATE_COLUMNS: [(&str, &str); 12] = [
    ("ex", "m"),
    ("ey", "m"),
    ("ez", "m"),
    ("erx", "-"),
    ("ery", "-"),
    ("erz", "-"),
    ("evx", "m/s"),
    ("evy", "m/s"),
    ("evz", "m/s"),
    ("ewx", "rad/s"),
    ("ewy", "rad/s"),
    ("ewz", "rad/s"),
];

impl StateLog {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.len())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<(), PcaError> {
        if self.samples.len() < 2 {
            return Err(PcaError::TooFewSamples(self.samples.len()));
        }
        let d = self.dim();
        if d == 0 || self.samples.iter().any(|s| s.len() != d) {
            return Err(PcaError::DimensionMismatch);
        }
        if self
            .samples
            .iter()
            .any(|s| s.iter().any(|v| !v.is_finite()))
        {
            return Err(PcaError::NonFinite);
        }
        Ok(())
    }

    /// `d x K` data matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.samples)
    }

    fn columns(&self) -> Vec<Column> {
        if self.dim() == 12 {
            ERROR_STATE_COLUMNS
                .iter()
                .map(|(n, u)| col(*n, *u))
                .collect()
        } else {
            (0..self.dim()).map(|k| col(format!("z{k}"), "-")).collect()
        }
    }

    pub fn write_csv<W: Write>(&self, out: W, header: &FileHeader) -> Result<(), PcaError> {
        let header = header
            .clone()
            .with_meta("rate_hz", self.rate_hz)
            .with_meta("source", &self.source);
        write_csv(
            out,
            &header,
            &self.columns(),
            self.samples.iter().map(|s| s.iter().copied().collect()),
        )?;
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self, PcaError> {
        let (_, rows) = read_csv(text).map_err(PcaError::Parse)?;
        let rate_hz = header_value(text, "rate_hz")
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NAN);
        let source = header_value(text, "source").unwrap_or_default();
        let log = Self {
            samples: rows.into_iter().map(DVector::from_vec).collect(),
            rate_hz,
            source,
        };
        if log.samples.iter().any(|s| s.len() != log.dim()) {
            return Err(PcaError::DimensionMismatch);
        }
        Ok(log)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBox {
    pub u: DMatrix<f64>,
    pub mu: DVector<f64>,
    /// Rotated sample range before the margin.
    pub z_lo: DVector<f64>,
    pub z_hi: DVector<f64>,
    pub delta: f64,
    pub a_p: DMatrix<f64>,
    pub b_p: DVector<f64>,
}

/// Flips each column so its largest-magnitude entry is positive (the first
/// one on ties).
fn fix_signs(u: &mut DMatrix<f64>) {
    for mut c in u.column_iter_mut() {
        let peak = c.amax();
        if let Some(k) = c.iter().position(|v| v.abs() >= peak - 1e-12 * peak) {
            if c[k] < 0.0 {
                c.neg_mut();
            }
        }
    }
}

pub fn build_pca_box(log: &StateLog, delta: f64) -> Result<PcaBox, PcaError> {
    log.validate()?;
    if !delta.is_finite() {
        return Err(PcaError::NonFinite);
    }
    if delta < 0.0 {
        return Err(PcaError::NegativeMargin(delta));
    }
    let d = log.dim();
    let z = log.matrix();
    let k = z.ncols();
    let mu = z.column_mean();
    let mut centered = DMatrix::zeros(d, k.max(d));
    for (j, c) in z.column_iter().enumerate() {
        centered.set_column(j, &(c - &mu));
    }
    let mut u = if centered.amax() == 0.0 {
        log::warn!("all samples are identical; using the identity basis");
        DMatrix::identity(d, d)
    } else {
        centered
            .clone()
            .svd(true, false)
            .u
            .ok_or_else(|| PcaError::Parse("SVD did not converge".into()))?
    };
    fix_signs(&mut u);
    let ut = u.transpose();
    let rotated = &ut * centered.columns(0, k);
    let z_lo = DVector::from_iterator(d, rotated.row_iter().map(|r| r.min()));
    let z_hi = DVector::from_iterator(d, rotated.row_iter().map(|r| r.max()));
    let width = &z_hi - &z_lo;
    let lo = &z_lo - &width * delta;
    let hi = &z_hi + &width * delta;
    let shift = &ut * &mu;
    let mut a_p = DMatrix::zeros(2 * d, d);
    a_p.rows_mut(0, d).copy_from(&ut);
    a_p.rows_mut(d, d).copy_from(&(-&ut));
    let mut b_p = DVector::zeros(2 * d);
    b_p.rows_mut(0, d).copy_from(&(&hi + &shift));
    b_p.rows_mut(d, d).copy_from(&(-(&lo + &shift)));
    Ok(PcaBox {
        u,
        mu,
        z_lo,
        z_hi,
        delta,
        a_p,
        b_p,
    })
}

impl PcaBox {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn contains(&self, z: &DVector<f64>) -> bool {
        z.len() == self.dim()
            && (&self.a_p * z - &self.b_p)
                .iter()
                .all(|&v| v <= CONTAINS_TOL)
    }

    /// Inflated rotated bounds.
    pub fn rotated_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let w = &self.z_hi - &self.z_lo;
        (&self.z_lo - &w * self.delta, &self.z_hi + &w * self.delta)
    }

    pub fn volume(&self) -> f64 {
        let (lo, hi) = self.rotated_bounds();
        (hi - lo).product()
    }

    /// Uniform sample inside the box.
    pub fn sample(&self, rng: &mut impl Rng) -> DVector<f64> {
        let (lo, hi) = self.rotated_bounds();
        let t = DVector::from_iterator(
            self.dim(),
            lo.iter()
                .zip(hi.iter())
                .map(|(&a, &b)| if a < b { rng.gen_range(a..b) } else { a }),
        );
        &self.u * t + &self.mu
    }

    pub fn to_json(&self) -> Result<String, PcaError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PcaError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn box_to_polyhedron(b: &PcaBox) -> Polyhedron {
    Polyhedron {
        a: b.a_p.clone(),
        b: b.b_p.clone(),
    }
}

/// Axis-aligned box of the samples, widened by `delta` times its width on
/// each side like the rotated box.
pub fn axis_aligned_box(
    log: &StateLog,
    delta: f64,
) -> Result<(DVector<f64>, DVector<f64>), PcaError> {
    log.validate()?;
    let z = log.matrix();
    let lo = DVector::from_iterator(z.nrows(), z.row_iter().map(|r| r.min()));
    let hi = DVector::from_iterator(z.nrows(), z.row_iter().map(|r| r.max()));
    let w = &hi - &lo;
    Ok((&lo - &w * delta, &hi + &w * delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    /// `vol(pca) / vol(other)` from rejection sampling.
    pub monte_carlo: f64,
    /// The same ratio from the side lengths.
    pub exact: f64,
    pub samples: usize,
    /// Fraction of samples from `other` that fall in the rotated box.
    pub hit_other: f64,
    /// Fraction of samples from the rotated box that fall in `other`.
    pub hit_pca: f64,
}

fn in_box(z: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> bool {
    z.iter()
        .zip(lo.iter().zip(hi.iter()))
        .all(|(v, (a, b))| a <= v && v <= b)
}

/// Volume of `pca` relative to the axis-aligned box `[lo, hi]`.
///
/// Uniform samples from each set estimate the fraction of it covered by the
/// other; the ratio of the two fractions is the volume ratio. Degenerate
/// boxes have zero volume.
pub fn volume_ratio(
    pca: &PcaBox,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> VolumeEstimate {
    let other_volume: f64 = (hi - lo).product();
    let exact = pca.volume() / other_volume;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits_other = 0usize;
    for _ in 0..samples {
        let z = DVector::from_iterator(
            lo.len(),
            lo.iter()
                .zip(hi.iter())
                .map(|(&a, &b)| if a < b { rng.gen_range(a..b) } else { a }),
        );
        hits_other += pca.contains(&z) as usize;
    }
    let mut hits_pca = 0usize;
    for _ in 0..samples {
        hits_pca += in_box(&pca.sample(&mut rng), lo, hi) as usize;
    }
    let n = samples.max(1) as f64;
    let (hit_other, hit_pca) = (hits_other as f64 / n, hits_pca as f64 / n);
    let monte_carlo = if pca.volume() == 0.0 {
        0.0
    } else if hit_pca > 0.0 {
        hit_other / hit_pca
    } else {
        f64::INFINITY
    };
    VolumeEstimate {
        monte_carlo,
        exact,
        samples,
        hit_other,
        hit_pca,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn log(samples: Vec<DVector<f64>>) -> StateLog {
        StateLog {
            samples,
            rate_hz: 20.0,
            source: "test".into(),
        }
    }

    #[test]
    fn rank_one_data() {
        let mut a = DVector::zeros(12);
        let z = a.clone();
        a[0] = 1.0;
        let b = build_pca_box(&log(vec![z, a]), 0.0).unwrap();
        assert_eq!(b.mu[0], 0.5);
        assert!(
            (b.u.column(0).abs() - DVector::from_fn(12, |i, _| (i == 0) as u8 as f64)).amax()
                < 1e-12
        );
        let widths = &b.z_hi - &b.z_lo;
        assert!((widths[0] - 1.0).abs() < 1e-12);
        assert!(widths.rows(1, 11).amax() < 1e-12);
        assert!((b.u.transpose() * &b.u - DMatrix::identity(12, 12)).amax() < 1e-10);
    }

    #[test]
    fn margin_scales_width() {
        let l = log(vec![
            dvector![0.0, 0.0],
            dvector![2.0, 0.0],
            dvector![0.0, 1.0],
            dvector![2.0, 1.0],
        ]);
        let b = build_pca_box(&l, 2.0).unwrap();
        let (lo, hi) = b.rotated_bounds();
        let raw = &b.z_hi - &b.z_lo;
        assert!(((hi - lo) - raw * 5.0).amax() < 1e-12);
        assert_eq!(b.a_p.rows(0, 2), b.u.transpose());
        assert_eq!(b.a_p.rows(2, 2), -b.u.transpose());
    }

    #[test]
    fn containment_and_boundary() {
        let l = log(vec![
            dvector![0.0, 0.0],
            dvector![1.0, 1.0],
            dvector![2.0, 1.5],
            dvector![0.5, 1.0],
        ]);
        let b = build_pca_box(&l, 0.0).unwrap();
        assert!(l.samples.iter().all(|s| b.contains(s)));
        assert!(b.contains(&b.mu));
        let far = &b.mu + b.u.column(0) * 10.0;
        assert!(!b.contains(&far));
    }

    #[test]
    fn identical_samples_use_identity() {
        let b = build_pca_box(&log(vec![dvector![1.0, 2.0]; 3]), 1.0).unwrap();
        assert_eq!(b.u, DMatrix::identity(2, 2));
        assert_eq!(b.volume(), 0.0);
        assert!(b.contains(&dvector![1.0, 2.0]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            build_pca_box(&log(vec![dvector![1.0]]), 0.0),
            Err(PcaError::TooFewSamples(1))
        ));
        let l = log(vec![dvector![1.0], dvector![2.0]]);
        assert!(matches!(
            build_pca_box(&l, -1.0),
            Err(PcaError::NegativeMargin(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let l = log(vec![dvector![0.1, 0.2], dvector![-1.0 / 3.0, 4.0]]);
        let mut buf = Vec::new();
        l.write_csv(&mut buf, &FileHeader::new("state log", "h"))
            .unwrap();
        let back = StateLog::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, l);
    }
}
