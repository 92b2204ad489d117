//! Incrementally maintained `L D L'` factor of the working-set Gram matrix
//! `M_W M_W'`.
//!
//! Rows are appended when a constraint enters the working set and removed
//! with a rank-one update of the trailing block. Only the most recently
//! appended row may carry a zero pivot; such a factor is *singular* and the
//! solver then steps along the null-space direction of `M_W'`.

use nalgebra::DMatrix;

/// Relative pivot threshold below which an appended row is treated as
/// linearly dependent on the rows already in the factor.
pub const PIVOT_TOL: f64 = 1e-12;

/// Relative threshold for treating a direction component as negative.
pub const DIRECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Default)]
pub struct LdlFactor {
    /// Strictly lower part of the unit lower-triangular factor, row by row.
    rows: Vec<Vec<f64>>,
    diag: Vec<f64>,
    /// `|m_j|^2` for each row, the pivot scale.
    scale: Vec<f64>,
    singular: bool,
}

impl LdlFactor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Builds the factor for working set `ws` (in order).
    ///
    /// Returns `None` if any row except possibly the last is dependent.
    pub fn from_working_set(m_fac: &DMatrix<f64>, ws: &[usize]) -> Option<Self> {
        let mut f = Self::new();
        for (k, &j) in ws.iter().enumerate() {
            if f.singular {
                return None;
            }
            f.push(m_fac, &ws[..k], j);
        }
        Some(f)
    }

    /// Appends constraint `j` given the current working set `ws` (which must
    /// match the rows already factored). Returns `false` if the new pivot is
    /// numerically zero, leaving the factor singular.
    pub fn push(&mut self, m_fac: &DMatrix<f64>, ws: &[usize], j: usize) -> bool {
        debug_assert_eq!(ws.len(), self.len());
        debug_assert!(!self.singular);
        let mj = m_fac.row(j);
        let mut y: Vec<f64> = ws.iter().map(|&i| m_fac.row(i).dot(&mj)).collect();
        // Forward solve with the unit lower factor.
        for r in 0..y.len() {
            let s: f64 = self.rows[r].iter().zip(&y[..r]).map(|(l, v)| l * v).sum();
            y[r] -= s;
        }
        let gjj = mj.norm_squared();
        let mut pivot = gjj;
        let mut row = Vec::with_capacity(y.len());
        for (r, yr) in y.iter().enumerate() {
            let l = yr / self.diag[r];
            pivot -= l * yr;
            row.push(l);
        }
        self.rows.push(row);
        self.diag.push(pivot);
        self.scale.push(gjj);
        self.singular = !(pivot > PIVOT_TOL * gjj.max(f64::MIN_POSITIVE));
        !self.singular
    }

    /// Removes the row at position `pos` and restores the factorization of
    /// the remaining rows by a rank-one update of the trailing block.
    pub fn remove(&mut self, pos: usize) {
        let n = self.len();
        assert!(pos < n);
        let mut alpha = self.diag[pos];
        let mut w: Vec<f64> = (pos + 1..n).map(|r| self.rows[r][pos]).collect();
        self.rows.remove(pos);
        self.diag.remove(pos);
        self.scale.remove(pos);
        for row in self.rows.iter_mut().skip(pos) {
            row.remove(pos);
        }
        // Trailing block gets L2 D2 L2' + alpha w w'.
        for k in 0..w.len() {
            let j = pos + k;
            let p = w[k];
            let dj = self.diag[j] + alpha * p * p;
            let beta = if dj != 0.0 { p * alpha / dj } else { 0.0 };
            if dj != 0.0 {
                alpha = self.diag[j] * alpha / dj;
            }
            self.diag[j] = dj;
            for (t, r) in (k + 1..w.len()).zip(j + 1..) {
                w[t] -= p * self.rows[r][j];
                self.rows[r][j] += beta * w[t];
            }
        }
        self.singular = match self.diag.last() {
            Some(&d) => !(d > PIVOT_TOL * self.scale.last().copied().unwrap_or(1.0)),
            None => false,
        };
    }

    /// Solves `(M_W M_W') x = rhs` in place. The factor must be nonsingular.
    pub fn solve(&self, rhs: &mut [f64]) {
        debug_assert!(!self.singular);
        let n = self.len();
        for r in 0..n {
            let s: f64 = self.rows[r].iter().zip(&rhs[..r]).map(|(l, v)| l * v).sum();
            rhs[r] -= s;
        }
        for r in 0..n {
            rhs[r] /= self.diag[r];
        }
        for r in (0..n).rev() {
            let v = rhs[r];
            for c in 0..r {
                rhs[c] -= self.rows[r][c] * v;
            }
        }
    }

    /// Null-space direction for a singular factor: with `j` the last row,
    /// returns `p` with `p_j = 1` and `M_W' p = 0`.
    pub fn null_direction(&self) -> Vec<f64> {
        debug_assert!(self.singular);
        let n = self.len();
        let last = n - 1;
        // p_W' = -L'^-T l_j where l_j is the last factor row.
        let mut p: Vec<f64> = self.rows[last].iter().map(|v| -v).collect();
        for r in (0..last).rev() {
            let v = p[r];
            for c in 0..r {
                p[c] -= self.rows[r][c] * v;
            }
        }
        p.push(1.0);
        p
    }
}

/// Positions `k` with `dir[k]` clearly negative relative to the largest
/// component of `dir`.
pub fn blocking_positions(dir: &[f64]) -> Vec<usize> {
    let scale = dir.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    dir.iter()
        .enumerate()
        .filter(|(_, &v)| v < -DIRECTION_TOL * scale)
        .map(|(k, _)| k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn gram(m: &DMatrix<f64>, ws: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(ws.len(), ws.len(), |r, c| m.row(ws[r]).dot(&m.row(ws[c])))
    }

    fn check_solve(f: &LdlFactor, m: &DMatrix<f64>, ws: &[usize]) {
        let g = gram(m, ws);
        let rhs: Vec<f64> = (0..ws.len()).map(|k| k as f64 - 1.5).collect();
        let mut x = rhs.clone();
        f.solve(&mut x);
        let back = &g * DVector::from_vec(x);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn push_and_remove_match_direct_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(&mut rng, 8, 6);
        let mut ws = vec![];
        let mut f = LdlFactor::new();
        for j in [3, 0, 5, 1, 7] {
            assert!(f.push(&m, &ws, j));
            ws.push(j);
            check_solve(&f, &m, &ws);
        }
        for pos in [2, 0, 1] {
            f.remove(pos);
            ws.remove(pos);
            check_solve(&f, &m, &ws);
        }
    }

    #[test]
    fn dependent_row_gives_null_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = random_matrix(&mut rng, 4, 3);
        // Row 3 = 2 row0 - row1.
        let dep = m.row(0) * 2.0 - m.row(1);
        m.set_row(3, &dep);
        let ws = [0, 1, 2];
        let mut f = LdlFactor::from_working_set(&m, &ws).unwrap();
        assert!(!f.push(&m, &ws, 3));
        assert!(f.is_singular());
        let p = f.null_direction();
        let full = [0, 1, 2, 3];
        let mut combo = nalgebra::RowDVector::zeros(3);
        for (k, &i) in full.iter().enumerate() {
            combo += m.row(i) * p[k];
        }
        assert!(combo.amax() < 1e-12);
        assert!((p[0] + 2.0).abs() < 1e-10 && (p[1] - 1.0).abs() < 1e-10 && p[2].abs() < 1e-10);
        // Removing row 0 restores a regular factor.
        f.remove(0);
        assert!(!f.is_singular());
        check_solve(&f, &m, &[1, 2, 3]);
        assert_eq!(blocking_positions(&p), vec![0]);
    }
}
