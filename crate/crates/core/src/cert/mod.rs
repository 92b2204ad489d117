//! Exact complexity certification of the dual active-set solver.
//!
//! The solver is executed symbolically over a polyhedral parameter set.
//! Multipliers are kept as affine functions of `theta`, and every decision
//! the solver makes (which constraint to add, whether the equality-
//! constrained multipliers are dual feasible, which index blocks a step,
//! whether a step is clamped at zero) compares affine functions. Each
//! decision therefore splits the current region by halfspaces, and every
//! leaf of the resulting tree is a polyhedron on which the working-set
//! sequence and iteration count are constant.
//!
//! Ratio tests stay affine because, starting from an empty working set, the
//! dual gradient on the working set is always a multiple of the unit vector
//! of the most recently added constraint. The step direction is then a
//! `theta`-independent vector `r` times a positive scalar, which cancels in
//! every ratio comparison.

mod io;
mod measure;

pub use io::{read_partition, write_measurements, write_partition};
pub use measure::{
    cdf_and_histogram, difference_histogram, empirical_cdf, measure, measure_points,
    sample_uniform, wcet, AdmmProgram, BenchTables, CdfPoint, CostMode, DaqpProgram, HistogramBin,
    MeasurementVector, Program, RunCost,
};

use crate::condense::ParametricQP;
use crate::poly::{PolyError, Polyhedron};
use crate::qp::ldl::{blocking_positions, LdlFactor};
use crate::qp::{DualActiveSetSolver, QpError, SolverConfig, WorkingSet, TIE_TOL};
use crate::Checksum;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertError {
    #[error("certification starts from an empty working set")]
    UnsupportedInitialWorkingSet,
    #[error("parameter set has dimension {got}, problem expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("parameter set is empty or lower-dimensional")]
    EmptyThetaSet,
    #[error("LP failure: {0}")]
    Lp(#[from] PolyError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("measurement vector is empty")]
    EmptyMeasurement,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("program failed: {0}")]
    Program(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertOptions {
    /// Maximum number of regions before the exploration stops.
    pub region_budget: usize,
    /// Regions with more rows than this get redundant rows removed.
    pub row_cap: usize,
    /// Chebyshev radius below which a region counts as lower-dimensional.
    pub sliver_radius: f64,
    /// Remove redundant rows from every emitted region.
    pub prune_leaves: bool,
}

impl Default for CertOptions {
    fn default() -> Self {
        Self {
            region_budget: 1_000_000,
            row_cap: 48,
            sliver_radius: 1e-9,
            prune_leaves: true,
        }
    }
}

/// How the solver run ends inside a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionStatus {
    Optimal,
    IterationCapped,
    Infeasible,
    NumericalFailure,
    /// Lower-dimensional piece; its sequence is only a prefix and it carries
    /// no witness.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    /// Child indices from the root of the exploration tree, dot separated.
    pub path: String,
    pub poly: Polyhedron,
    pub ws_sequence: Vec<WorkingSet>,
    pub iterations: usize,
    pub status: RegionStatus,
    pub witness: Option<DVector<f64>>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStatus {
    Complete,
    BudgetExceeded,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertStats {
    pub nodes: usize,
    pub lp_calls: usize,
    pub slivers: usize,
    pub capped_regions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub regions: Vec<Region>,
    pub theta_set: Polyhedron,
    pub pqp_checksum: Checksum,
    pub status: PartitionStatus,
    pub stats: CertStats,
}

impl Partition {
    /// Largest iteration count over regions.
    pub fn max_iterations(&self) -> usize {
        self.regions.iter().map(|r| r.iterations).max().unwrap_or(0)
    }

    /// Ids of regions containing `theta` up to `tol`.
    pub fn locate(&self, theta: &DVector<f64>, tol: f64) -> Vec<usize> {
        self.regions
            .iter()
            .filter(|r| r.poly.contains(theta, tol))
            .map(|r| r.id)
            .collect()
    }

    pub fn capped_count(&self) -> usize {
        self.regions
            .iter()
            .filter(|r| r.status == RegionStatus::IterationCapped)
            .count()
    }
}

/// Affine function of `theta`: `h[..d] . theta + h[d]`.
type Aff = DVector<f64>;

#[derive(Debug, Clone)]
struct Geometry {
    poly: Polyhedron,
    center: DVector<f64>,
    radius: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Phase {
    Top,
    /// Equality-constrained multipliers on `W` are dual feasible.
    Feasible(DMatrix<f64>),
    Infeasible,
    /// Step towards the blocking index at `pos` with size `g`, direction
    /// `dir` on the working set.
    Clamp {
        pos: usize,
        g: Aff,
        dir: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Branch {
    geo: Geometry,
    path: Vec<u32>,
    ws: Vec<usize>,
    factor: LdlFactor,
    /// `m x (d+1)` affine multipliers.
    lambda: DMatrix<f64>,
    pending: Option<usize>,
    seq: Vec<WorkingSet>,
    iter: usize,
    phase: Phase,
}

// Leaves are the common case; boxing them would cost an allocation each.
#[allow(clippy::large_enum_variant)]
enum Node {
    Branch(Box<Branch>),
    Leaf {
        geo: Geometry,
        path: Vec<u32>,
        seq: Vec<WorkingSet>,
        iter: usize,
        status: RegionStatus,
    },
}

enum Split {
    Full(Geometry),
    Sliver(Geometry),
}

struct Certifier<'a> {
    d: usize,
    m: usize,
    m_fac: &'a DMatrix<f64>,
    /// `[W + M L^-1 F | b + M L^-1 f]`, the affine dual offset.
    dual_offset: DMatrix<f64>,
    gram: DMatrix<f64>,
    cfg: &'a SolverConfig,
    opts: &'a CertOptions,
    stats: CertStats,
}

fn range(h: &Aff, lo: &[f64], hi: &[f64]) -> (f64, f64) {
    let d = lo.len();
    let mut min = h[d];
    let mut max = h[d];
    for k in 0..d {
        let a = h[k];
        if a > 0.0 {
            min += a * lo[k];
            max += a * hi[k];
        } else if a < 0.0 {
            min += a * hi[k];
            max += a * lo[k];
        }
    }
    (min, max)
}

impl<'a> Certifier<'a> {
    fn geometry(
        &mut self,
        poly: Polyhedron,
        parent_box: Option<(&[f64], &[f64])>,
    ) -> Result<Option<Split>, CertError> {
        self.stats.lp_calls += 1;
        let cheb = match (poly.chebyshev(), parent_box) {
            // The wide default variable box can make the simplex singular;
            // the parent box encloses the child, so retry inside it.
            (Err(PolyError::LpFailure(_)), Some((lo, hi))) => {
                self.stats.lp_calls += 1;
                poly.chebyshev_within(lo, hi)
            }
            (r, _) => r,
        };
        let Some((center, radius)) = cheb? else {
            return Ok(None);
        };
        let poly = if poly.rows() > self.opts.row_cap {
            self.stats.lp_calls += poly.rows();
            poly.remove_redundant(1e-12)?
        } else {
            poly
        };
        if radius < self.opts.sliver_radius {
            let d = self.d;
            return Ok(Some(Split::Sliver(Geometry {
                poly,
                center,
                radius,
                lo: vec![f64::NEG_INFINITY; d],
                hi: vec![f64::INFINITY; d],
            })));
        }
        self.stats.lp_calls += 2 * self.d;
        let (lo, hi) = match (poly.bounding_box(), parent_box) {
            (Ok(b), _) => b,
            // Thin sets can trip the LP tolerances. Any enclosing box is
            // valid for filtering, so keep the parent's.
            (Err(PolyError::Empty | PolyError::LpFailure(_)), Some((lo, hi))) => {
                (lo.to_vec(), hi.to_vec())
            }
            (Err(e), _) => return Err(e.into()),
        };
        Ok(Some(Split::Full(Geometry {
            poly,
            center,
            radius,
            lo,
            hi,
        })))
    }

    /// Splits `parent` by a covering family of options, each a list of
    /// affine rows `h(theta) <= 0`. Returns the nonempty children with their
    /// option index.
    fn split(
        &mut self,
        parent: &Geometry,
        options: Vec<Vec<Aff>>,
    ) -> Result<Vec<(usize, Split)>, CertError> {
        let d = self.d;
        let mut kept: Vec<(usize, Vec<Aff>)> = Vec::new();
        'opt: for (k, rows) in options.into_iter().enumerate() {
            let mut needed = Vec::new();
            for h in rows {
                let (min, max) = range(&h, &parent.lo, &parent.hi);
                if min > 0.0 {
                    continue 'opt;
                }
                if max > 0.0 {
                    needed.push(h);
                }
            }
            kept.push((k, needed));
        }
        if kept.len() == 1 {
            // The options cover the parent, so a single survivor is all of it.
            return Ok(vec![(kept[0].0, Split::Full(parent.clone()))]);
        }
        let mut out = Vec::new();
        for (k, rows) in kept {
            if rows.is_empty() {
                out.push((k, Split::Full(parent.clone())));
                continue;
            }
            let a = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]);
            let b = DVector::from_fn(rows.len(), |r, _| -rows[r][d]);
            if let Some(s) = self.geometry(
                parent.poly.with_rows(&a, &b),
                Some((&parent.lo, &parent.hi)),
            )? {
                out.push((k, s));
            }
        }
        if out.len() == 1 {
            if let Split::Full(_) = out[0].1 {
                let k = out[0].0;
                return Ok(vec![(k, Split::Full(parent.clone()))]);
            }
        }
        Ok(out)
    }

    fn leaf(br: &Branch, geo: Geometry, status: RegionStatus) -> Node {
        Node::Leaf {
            geo,
            path: br.path.clone(),
            seq: br.seq.clone(),
            iter: br.iter,
            status,
        }
    }

    /// Wraps split results as child nodes, building continuing branches with
    /// `make` (which may itself turn a child into a leaf).
    fn children<F>(&self, br: &Branch, splits: Vec<(usize, Split)>, mut make: F) -> Vec<Node>
    where
        F: FnMut(usize, Branch) -> Node,
    {
        let many = splits.len() > 1;
        splits
            .into_iter()
            .enumerate()
            .map(|(ci, (k, s))| {
                let mut child = br.clone();
                if many {
                    child.path.push(ci as u32);
                }
                match s {
                    Split::Full(geo) => {
                        child.geo = geo;
                        make(k, child)
                    }
                    Split::Sliver(geo) => Self::leaf(&child, geo, RegionStatus::Degenerate),
                }
            })
            .collect()
    }

    /// Options for `argmin_k g_k` over candidates in constraint-index
    /// order. A difference that stays within the solver's tie tolerance on
    /// the whole bounding box is a tie, won by the lower index as in the
    /// concrete solver.
    fn argmin_options(values: &[Aff], geo: &Geometry) -> Vec<Vec<Aff>> {
        let d = geo.lo.len();
        let mut never = DVector::zeros(d + 1);
        never[d] = 1.0;
        (0..values.len())
            .map(|k| {
                let mut rows = Vec::new();
                for l in (0..values.len()).filter(|&l| l != k) {
                    let diff = &values[k] - &values[l];
                    let (min, max) = range(&diff, &geo.lo, &geo.hi);
                    if min >= -TIE_TOL && max <= TIE_TOL {
                        if l < k {
                            return vec![never.clone()];
                        }
                        continue;
                    }
                    rows.push(diff);
                }
                rows
            })
            .collect()
    }

    fn ratio_split(&mut self, br: Branch, dir: Vec<f64>) -> Result<Vec<Node>, CertError> {
        let mut block = blocking_positions(&dir);
        block.sort_by_key(|&k| br.ws[k]);
        let g: Vec<Aff> = block
            .iter()
            .map(|&k| br.lambda.row(br.ws[k]).transpose() / (-dir[k]))
            .collect();
        let splits = self.split(&br.geo, Self::argmin_options(&g, &br.geo))?;
        Ok(self.children(&br, splits, |k, mut child| {
            child.phase = Phase::Clamp {
                pos: block[k],
                g: g[k].clone(),
                dir: dir.clone(),
            };
            Node::Branch(Box::new(child))
        }))
    }

    fn expand(&mut self, mut br: Branch) -> Result<Vec<Node>, CertError> {
        self.stats.nodes += 1;
        let d = self.d;
        let cap = self.cfg.max_iter;
        match std::mem::replace(&mut br.phase, Phase::Top) {
            Phase::Top if br.factor.is_singular() => {
                let dir = br.factor.null_direction();
                if blocking_positions(&dir).is_empty() {
                    let geo = br.geo.clone();
                    return Ok(vec![Self::leaf(&br, geo, RegionStatus::Infeasible)]);
                }
                if br.iter >= cap {
                    let geo = br.geo.clone();
                    return Ok(vec![Self::leaf(&br, geo, RegionStatus::IterationCapped)]);
                }
                self.ratio_split(br, dir)
            }
            Phase::Top => {
                let w = br.ws.len();
                let mut lam_star = DMatrix::zeros(w, d + 1);
                for c in 0..=d {
                    let mut col: Vec<f64> =
                        br.ws.iter().map(|&i| -self.dual_offset[(i, c)]).collect();
                    br.factor.solve(&mut col);
                    for k in 0..w {
                        lam_star[(k, c)] = col[k];
                    }
                }
                // h_k = -(lambda*_k + eps_d) <= 0 is dual feasibility of k.
                let feas: Vec<Aff> = (0..w)
                    .map(|k| {
                        let mut h = -lam_star.row(k).transpose();
                        h[d] -= self.cfg.eps_dual;
                        h
                    })
                    .collect();
                let mut options = vec![feas.clone()];
                for k in 0..w {
                    let mut rows: Vec<Aff> = feas[..k].to_vec();
                    rows.push(-&feas[k]);
                    options.push(rows);
                }
                let splits = self.split(&br.geo, options)?;
                Ok(self.children(&br, splits, |k, mut child| {
                    child.phase = if k == 0 {
                        Phase::Feasible(lam_star.clone())
                    } else {
                        Phase::Infeasible
                    };
                    Node::Branch(Box::new(child))
                }))
            }
            Phase::Feasible(lam_star) => {
                for (k, &i) in br.ws.iter().enumerate() {
                    br.lambda.set_row(i, &lam_star.row(k));
                }
                br.pending = None;
                let mu = &self.dual_offset + &self.gram * &br.lambda;
                let cand: Vec<usize> = (0..self.m).filter(|i| !br.ws.contains(i)).collect();
                let mu_c: Vec<Aff> = cand.iter().map(|&i| mu.row(i).transpose()).collect();
                // Option 0: nothing violated. Option 1 + t: add cand[t].
                let mut options: Vec<Vec<Aff>> = vec![mu_c
                    .iter()
                    .map(|h| {
                        let mut r = -h;
                        r[d] -= self.cfg.eps_primal;
                        r
                    })
                    .collect()];
                for (t, mut rows) in Self::argmin_options(&mu_c, &br.geo).into_iter().enumerate() {
                    let mut first = mu_c[t].clone();
                    first[d] += self.cfg.eps_primal;
                    rows.push(first);
                    options.push(rows);
                }
                let splits = self.split(&br.geo, options)?;
                let m_fac = self.m_fac;
                Ok(self.children(&br, splits, |k, mut child| {
                    if k == 0 {
                        let geo = child.geo.clone();
                        return Self::leaf(&child, geo, RegionStatus::Optimal);
                    }
                    if child.iter >= cap {
                        let geo = child.geo.clone();
                        return Self::leaf(&child, geo, RegionStatus::IterationCapped);
                    }
                    let j = cand[k - 1];
                    child.factor.push(m_fac, &child.ws, j);
                    child.ws.push(j);
                    child.pending = Some(j);
                    child.iter += 1;
                    child.seq.push(WorkingSet(child.ws.clone()));
                    child.phase = Phase::Top;
                    Node::Branch(Box::new(child))
                }))
            }
            Phase::Infeasible => {
                if br.iter >= cap {
                    let geo = br.geo.clone();
                    return Ok(vec![Self::leaf(&br, geo, RegionStatus::IterationCapped)]);
                }
                let Some(j) = br.pending else {
                    let geo = br.geo.clone();
                    return Ok(vec![Self::leaf(&br, geo, RegionStatus::NumericalFailure)]);
                };
                let pos = br
                    .ws
                    .iter()
                    .position(|&i| i == j)
                    .expect("pending index is in W");
                let mut r = vec![0.0; br.ws.len()];
                r[pos] = 1.0;
                br.factor.solve(&mut r);
                if blocking_positions(&r).is_empty() {
                    let geo = br.geo.clone();
                    return Ok(vec![Self::leaf(&br, geo, RegionStatus::NumericalFailure)]);
                }
                self.ratio_split(br, r)
            }
            Phase::Clamp { pos, g, dir } => {
                let nonneg = vec![-&g];
                let neg = vec![g.clone()];
                let splits = self.split(&br.geo, vec![nonneg, neg])?;
                Ok(self.children(&br, splits, |k, mut child| {
                    if k == 0 {
                        for (t, &i) in child.ws.iter().enumerate() {
                            let row = child.lambda.row(i).transpose() + &g * dir[t];
                            child.lambda.set_row(i, &row.transpose());
                        }
                    }
                    let b = child.ws[pos];
                    child.lambda.row_mut(b).fill(0.0);
                    child.ws.remove(pos);
                    child.factor.remove(pos);
                    child.iter += 1;
                    child.seq.push(WorkingSet(child.ws.clone()));
                    child.phase = Phase::Top;
                    Node::Branch(Box::new(child))
                }))
            }
        }
    }
}

fn path_string(path: &[u32]) -> String {
    if path.is_empty() {
        return "root".into();
    }
    path.iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(".")
}

/// Partitions `theta_set` into regions of constant working-set sequence.
pub fn certify(
    pqp: &ParametricQP,
    theta_set: &Polyhedron,
    cfg: &SolverConfig,
    opts: &CertOptions,
) -> Result<Partition, CertError> {
    cfg.validate(pqp.m())?;
    if !cfg.initial_ws.is_empty() {
        return Err(CertError::UnsupportedInitialWorkingSet);
    }
    let d = pqp.theta_dim();
    if theta_set.dim() != d {
        return Err(CertError::DimensionMismatch {
            got: theta_set.dim(),
            expected: d,
        });
    }
    let solver = DualActiveSetSolver::new(&pqp.h, &pqp.a)?;
    let m_fac = solver.m_fac();
    let l = solver.cholesky_factor();
    let m = pqp.m();

    // d(theta) = b(theta) + M L^-1 f(theta).
    let mut f_aff = DMatrix::zeros(pqp.n(), d + 1);
    f_aff.view_mut((0, 0), (pqp.n(), d)).copy_from(&pqp.f_theta);
    f_aff.set_column(d, &pqp.f_bar);
    let v_aff = l
        .solve_lower_triangular(&f_aff)
        .ok_or(QpError::NotPositiveDefinite)?;
    let mut dual_offset = m_fac * v_aff;
    for i in 0..m {
        for c in 0..d {
            dual_offset[(i, c)] += pqp.w_theta[(i, c)];
        }
        dual_offset[(i, d)] += pqp.b_bar[i];
    }
    let gram = m_fac * m_fac.transpose();

    let mut cert = Certifier {
        d,
        m,
        m_fac,
        dual_offset,
        gram,
        cfg,
        opts,
        stats: CertStats::default(),
    };
    let root_poly = theta_set.remove_redundant(1e-12)?;
    let root_geo = match cert.geometry(root_poly, None)? {
        Some(Split::Full(g)) => g,
        _ => return Err(CertError::EmptyThetaSet),
    };
    let root = Branch {
        geo: root_geo,
        path: Vec::new(),
        ws: Vec::new(),
        factor: LdlFactor::new(),
        lambda: DMatrix::zeros(m, d + 1),
        pending: None,
        seq: vec![WorkingSet::empty()],
        iter: 0,
        phase: Phase::Top,
    };

    let mut regions = Vec::new();
    let mut status = PartitionStatus::Complete;
    let mut stack = vec![Node::Branch(Box::new(root))];
    while let Some(node) = stack.pop() {
        match node {
            Node::Branch(br) => {
                let mut kids = cert.expand(*br)?;
                kids.reverse();
                stack.extend(kids);
            }
            Node::Leaf {
                geo,
                path,
                seq,
                iter,
                status: st,
            } => {
                if regions.len() >= opts.region_budget {
                    status = PartitionStatus::BudgetExceeded;
                    break;
                }
                let degenerate = st == RegionStatus::Degenerate;
                if degenerate {
                    cert.stats.slivers += 1;
                }
                if st == RegionStatus::IterationCapped {
                    cert.stats.capped_regions += 1;
                }
                let poly = if opts.prune_leaves && !degenerate {
                    cert.stats.lp_calls += geo.poly.rows();
                    geo.poly.remove_redundant(1e-12)?
                } else {
                    geo.poly
                };
                regions.push(Region {
                    id: regions.len(),
                    path: path_string(&path),
                    poly,
                    ws_sequence: seq,
                    iterations: iter,
                    status: st,
                    witness: (!degenerate).then_some(geo.center),
                    radius: geo.radius,
                });
            }
        }
    }
    if !stack.is_empty() && status == PartitionStatus::Complete {
        status = PartitionStatus::BudgetExceeded;
    }
    Ok(Partition {
        regions,
        theta_set: theta_set.clone(),
        pqp_checksum: pqp.checksum(),
        status,
        stats: cert.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::dual_active_set_solve;
    use nalgebra::{dmatrix, dvector};

    /// One-variable problem min 1/2 x^2 - theta x s.t. x <= 1, x >= -1.
    fn clipped_identity() -> ParametricQP {
        ParametricQP {
            h: dmatrix![1.0],
            a: dmatrix![1.0; -1.0],
            f_bar: dvector![0.0],
            f_theta: dmatrix![-1.0],
            b_bar: dvector![1.0, 1.0],
            w_theta: DMatrix::zeros(2, 1),
            nu: 1,
        }
    }

    #[test]
    fn one_dimensional_saturation() {
        let pqp = clipped_identity();
        let theta = Polyhedron::from_box(&[-3.0], &[3.0]).unwrap();
        let p = certify(
            &pqp,
            &theta,
            &SolverConfig::default(),
            &CertOptions::default(),
        )
        .unwrap();
        assert_eq!(p.status, PartitionStatus::Complete);
        assert_eq!(p.regions.len(), 3);
        let mut iters: Vec<usize> = p.regions.iter().map(|r| r.iterations).collect();
        iters.sort();
        assert_eq!(iters, vec![0, 1, 1]);
        for r in &p.regions {
            let w = r.witness.as_ref().unwrap();
            let t = dual_active_set_solve(&pqp.instantiate(w).unwrap(), &SolverConfig::default())
                .unwrap();
            assert_eq!(t.ws_sequence, r.ws_sequence);
        }
    }

    #[test]
    fn unconstrained_problem_has_one_region() {
        let mut pqp = clipped_identity();
        pqp.b_bar = dvector![10.0, 10.0];
        let theta = Polyhedron::from_box(&[-3.0], &[3.0]).unwrap();
        let p = certify(
            &pqp,
            &theta,
            &SolverConfig::default(),
            &CertOptions::default(),
        )
        .unwrap();
        assert_eq!(p.regions.len(), 1);
        assert_eq!(p.regions[0].iterations, 0);
        assert_eq!(p.regions[0].ws_sequence, vec![WorkingSet::empty()]);
    }

    #[test]
    fn budget_gives_partial_partition() {
        let pqp = clipped_identity();
        let theta = Polyhedron::from_box(&[-3.0], &[3.0]).unwrap();
        let opts = CertOptions {
            region_budget: 1,
            ..CertOptions::default()
        };
        let p = certify(&pqp, &theta, &SolverConfig::default(), &opts).unwrap();
        assert_eq!(p.status, PartitionStatus::BudgetExceeded);
        assert_eq!(p.regions.len(), 1);
    }

    #[test]
    fn rejects_warm_start_and_wrong_dimension() {
        let pqp = clipped_identity();
        let theta = Polyhedron::from_box(&[-3.0], &[3.0]).unwrap();
        let cfg = SolverConfig {
            initial_ws: WorkingSet(vec![0]),
            ..SolverConfig::default()
        };
        assert!(matches!(
            certify(&pqp, &theta, &cfg, &CertOptions::default()),
            Err(CertError::UnsupportedInitialWorkingSet)
        ));
        let theta2 = Polyhedron::from_box(&[-3.0, 0.0], &[3.0, 1.0]).unwrap();
        assert!(matches!(
            certify(
                &pqp,
                &theta2,
                &SolverConfig::default(),
                &CertOptions::default()
            ),
            Err(CertError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn iteration_cap_is_surfaced() {
        let pqp = clipped_identity();
        let theta = Polyhedron::from_box(&[-3.0], &[3.0]).unwrap();
        let cfg = SolverConfig {
            max_iter: 1,
            ..SolverConfig::default()
        };
        // With one iteration allowed the saturated regions still finish.
        let p = certify(&pqp, &theta, &cfg, &CertOptions::default()).unwrap();
        assert_eq!(p.capped_count(), 0);
        let two = ParametricQP {
            h: DMatrix::identity(2, 2),
            a: DMatrix::identity(2, 2),
            f_bar: dvector![0.0, 0.0],
            f_theta: -DMatrix::identity(2, 2),
            b_bar: dvector![1.0, 1.0],
            w_theta: DMatrix::zeros(2, 2),
            nu: 1,
        };
        let theta = Polyhedron::from_box(&[-3.0, -3.0], &[3.0, 3.0]).unwrap();
        let p = certify(&two, &theta, &cfg, &CertOptions::default()).unwrap();
        assert!(p.capped_count() > 0);
        assert!(p
            .regions
            .iter()
            .filter(|r| r.status == RegionStatus::IterationCapped)
            .all(|r| r.iterations == 1));
    }
}
