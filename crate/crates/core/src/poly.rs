//! H-polyhedra `{theta : A theta <= b}` and the LP queries the certifier
//! needs: Chebyshev center, bounding box and redundant-row removal.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cap on the Chebyshev radius so that unbounded sets still give a finite LP.
const RADIUS_CAP: f64 = 1e6;

/// Every LP variable is boxed to `[-FAR, FAR]`; optima at that scale are
/// reported as unbounded.
const FAR: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("polyhedron data contains non-finite entries")]
    NonFinite,
    #[error("LP failure: {0}")]
    LpFailure(String),
    #[error("polyhedron is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Polyhedron {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, PolyError> {
        if a.nrows() != b.len() {
            return Err(PolyError::DimensionMismatch(format!(
                "A has {} rows, b has {}",
                a.nrows(),
                b.len()
            )));
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(PolyError::NonFinite);
        }
        Ok(Self { a, b })
    }

    /// Axis-aligned box `lo <= theta <= hi` as `[I; -I] theta <= [hi; -lo]`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self, PolyError> {
        if lo.len() != hi.len() {
            return Err(PolyError::DimensionMismatch(
                "box bounds differ in length".into(),
            ));
        }
        let d = lo.len();
        let a = DMatrix::from_fn(2 * d, d, |r, c| match (r < d, r % d == c) {
            (true, true) => 1.0,
            (false, true) => -1.0,
            _ => 0.0,
        });
        let b = DVector::from_fn(2 * d, |r, _| if r < d { hi[r] } else { -lo[r - d] });
        Self::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        (0..self.rows()).all(|i| self.a.row(i).dot(&theta.transpose()) <= self.b[i] + tol)
    }

    /// Largest violation `max_i (A theta - b)_i` (negative inside).
    pub fn max_violation(&self, theta: &DVector<f64>) -> f64 {
        (0..self.rows())
            .map(|i| self.a.row(i).dot(&theta.transpose()) - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Appends rows `a_new theta <= b_new`.
    pub fn with_rows(&self, a_new: &DMatrix<f64>, b_new: &DVector<f64>) -> Self {
        let d = self.dim();
        let mut a = DMatrix::zeros(self.rows() + a_new.nrows(), d);
        a.view_mut((0, 0), (self.rows(), d)).copy_from(&self.a);
        a.view_mut((self.rows(), 0), (a_new.nrows(), d))
            .copy_from(a_new);
        let mut b = DVector::zeros(self.rows() + b_new.len());
        b.rows_mut(0, self.rows()).copy_from(&self.b);
        b.rows_mut(self.rows(), b_new.len()).copy_from(b_new);
        Self { a, b }
    }

    /// Keeps only the listed rows.
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let d = self.dim();
        Self {
            a: DMatrix::from_fn(keep.len(), d, |r, c| self.a[(keep[r], c)]),
            b: DVector::from_fn(keep.len(), |r, _| self.b[keep[r]]),
        }
    }

    /// Row `i` scaled to unit norm with round-off sized entries dropped;
    /// `None` for a zero row. Both keep the LP factorizations well posed.
    fn unit_row(&self, i: usize) -> Option<(Vec<(usize, f64)>, f64)> {
        let norm = self.a.row(i).norm();
        if norm == 0.0 {
            return None;
        }
        let coefs = (0..self.dim())
            .map(|k| (k, self.a[(i, k)] / norm))
            .filter(|(_, v)| v.abs() > 1e-12)
            .collect();
        Some((coefs, self.b[i] / norm))
    }

    /// Center and radius of the largest inscribed ball, or `None` when the
    /// set is empty. The radius is capped at a large constant for unbounded
    /// sets.
    pub fn chebyshev(&self) -> Result<Option<(DVector<f64>, f64)>, PolyError> {
        let far = vec![FAR; self.dim()];
        let near: Vec<f64> = far.iter().map(|v| -v).collect();
        self.chebyshev_within(&near, &far)
    }

    /// As [`Self::chebyshev`] for a set known to lie in `lo <= theta <= hi`.
    /// Tight bounds keep the LP better conditioned than the default box.
    pub fn chebyshev_within(
        &self,
        lo: &[f64],
        hi: &[f64],
    ) -> Result<Option<(DVector<f64>, f64)>, PolyError> {
        if lo.len() != self.dim() || hi.len() != self.dim() {
            return Err(PolyError::DimensionMismatch("box bounds".into()));
        }
        match self.chebyshev_lp(lo, hi, 0.0) {
            Err(PolyError::LpFailure(_)) => {}
            other => return other,
        }
        // The simplex can report a singular basis instead of infeasibility.
        // Letting the radius go negative makes the LP always feasible, and a
        // negative optimum then certifies that the set is empty.
        Ok(self
            .chebyshev_lp(lo, hi, -RADIUS_CAP)?
            .filter(|(_, r)| *r >= 0.0))
    }

    fn chebyshev_lp(
        &self,
        lo: &[f64],
        hi: &[f64],
        r_min: f64,
    ) -> Result<Option<(DVector<f64>, f64)>, PolyError> {
        let d = self.dim();
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let x: Vec<_> = (0..d)
            .map(|k| lp.add_var(0.0, (lo[k].max(-FAR), hi[k].min(FAR))))
            .collect();
        let r = lp.add_var(1.0, (r_min, RADIUS_CAP));
        for i in 0..self.rows() {
            let Some((coefs, rhs)) = self.unit_row(i) else {
                if self.b[i] < 0.0 {
                    return Ok(None);
                }
                continue;
            };
            let mut terms: Vec<_> = coefs.into_iter().map(|(k, v)| (x[k], v)).collect();
            terms.push((r, 1.0));
            lp.add_constraint(terms, ComparisonOp::Le, rhs);
        }
        match lp.solve() {
            Ok(outcome) => {
                let sol = outcome
                    .solution()
                    .ok_or_else(|| PolyError::LpFailure("interrupted".into()))?;
                let c = DVector::from_fn(d, |k, _| sol.var_value(x[k]));
                Ok(Some((c, sol.var_value(r))))
            }
            Err(microlp::Error::Infeasible) => Ok(None),
            Err(e) => Err(PolyError::LpFailure(e.to_string())),
        }
    }

    /// Maximizes `c' theta` over the set. `Ok(None)` means unbounded.
    pub fn support(&self, c: &DVector<f64>) -> Result<Option<f64>, PolyError> {
        let d = self.dim();
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let x: Vec<_> = (0..d).map(|k| lp.add_var(c[k], (-FAR, FAR))).collect();
        for i in 0..self.rows() {
            let Some((coefs, rhs)) = self.unit_row(i) else {
                if self.b[i] < 0.0 {
                    return Err(PolyError::Empty);
                }
                continue;
            };
            // Unscaled rows keep the optimum exact on simple sets.
            let norm = self.a.row(i).norm();
            let terms: Vec<_> = coefs.into_iter().map(|(k, v)| (x[k], v * norm)).collect();
            lp.add_constraint(terms, ComparisonOp::Le, rhs * norm);
        }
        match lp.solve() {
            Ok(outcome) => {
                let sol = outcome
                    .solution()
                    .ok_or_else(|| PolyError::LpFailure("interrupted".into()))?;
                if sol.objective() >= 0.5 * FAR * c.amax() {
                    return Ok(None);
                }
                Ok(Some(sol.objective()))
            }
            Err(microlp::Error::Unbounded) => Ok(None),
            Err(microlp::Error::Infeasible) => Err(PolyError::Empty),
            Err(e) => Err(PolyError::LpFailure(e.to_string())),
        }
    }

    /// Tightest axis-aligned box containing the set (infinite where
    /// unbounded).
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>), PolyError> {
        let d = self.dim();
        let mut lo = vec![f64::NEG_INFINITY; d];
        let mut hi = vec![f64::INFINITY; d];
        for k in 0..d {
            let mut e = DVector::zeros(d);
            e[k] = 1.0;
            if let Some(v) = self.support(&e)? {
                hi[k] = v;
            }
            e[k] = -1.0;
            if let Some(v) = self.support(&e)? {
                lo[k] = -v;
            }
        }
        Ok((lo, hi))
    }

    /// Drops rows implied by the remaining ones. Rows are tested in order
    /// and removed as soon as they are found redundant.
    pub fn remove_redundant(&self, tol: f64) -> Result<Self, PolyError> {
        let mut keep: Vec<usize> = Vec::with_capacity(self.rows());
        let mut active: Vec<bool> = vec![true; self.rows()];
        for i in 0..self.rows() {
            let norm = self.a.row(i).norm();
            if norm == 0.0 {
                if self.b[i] < 0.0 {
                    return Err(PolyError::Empty);
                }
                active[i] = false;
            }
        }
        for i in 0..self.rows() {
            if !active[i] {
                continue;
            }
            // Relax row i slightly so the LP stays bounded in its direction.
            let others: Vec<usize> = (0..self.rows()).filter(|&k| active[k] && k != i).collect();
            let mut relaxed = self.select_rows(&others);
            relaxed = relaxed.with_rows(
                &DMatrix::from_fn(1, self.dim(), |_, c| self.a[(i, c)]),
                &DVector::from_element(1, self.b[i] + 1.0),
            );
            let norm = self.a.row(i).norm();
            let c = self.a.row(i).transpose();
            match relaxed.support(&c) {
                Ok(Some(v)) if v <= self.b[i] + tol * norm => active[i] = false,
                // An LP that fails on a thin set keeps the row.
                Ok(_) | Err(PolyError::Empty | PolyError::LpFailure(_)) => keep.push(i),
                Err(e) => return Err(e),
            }
        }
        Ok(self.select_rows(&keep))
    }

    /// Vertices of a bounded 2-d polyhedron in counter-clockwise order.
    pub fn vertices_2d(&self) -> Vec<[f64; 2]> {
        if self.dim() != 2 {
            return Vec::new();
        }
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for i in 0..self.rows() {
            for j in i + 1..self.rows() {
                let (a1, b1, c1) = (self.a[(i, 0)], self.a[(i, 1)], self.b[i]);
                let (a2, b2, c2) = (self.a[(j, 0)], self.a[(j, 1)], self.b[j]);
                let det = a1 * b2 - a2 * b1;
                let scale = (a1.hypot(b1) * a2.hypot(b2)).max(f64::MIN_POSITIVE);
                if det.abs() < 1e-12 * scale {
                    continue;
                }
                let p =
                    DVector::from_vec(vec![(c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det]);
                let tol = 1e-9 * (1.0 + p.amax());
                if self.contains(&p, tol)
                    && !pts
                        .iter()
                        .any(|q| (q[0] - p[0]).abs() < tol && (q[1] - p[1]).abs() < tol)
                {
                    pts.push([p[0], p[1]]);
                }
            }
        }
        if pts.is_empty() {
            return pts;
        }
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        pts.sort_by(|p, q| {
            let ap = (p[1] - cy).atan2(p[0] - cx);
            let aq = (q[1] - cy).atan2(q[0] - cx);
            ap.total_cmp(&aq)
        });
        pts
    }
}
