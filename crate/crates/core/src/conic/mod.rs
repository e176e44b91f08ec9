//! Conic programs over real coordinates and an ADMM solver for them.
//!
//! A program has variable blocks (free, nonnegative, or Hermitian PSD in
//! product-basis coordinates), linear equality constraints and a linear
//! objective. Inequalities are written with nonnegative slack blocks.

mod kkt;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::procmat::CoordSubspace;
use crate::qsys::{herm_eig, CoordMap, SystemLayout};
use kkt::{Kkt, SparseRow};

#[derive(Clone, Debug, PartialEq)]
pub enum Cone {
    Free,
    Nonneg,
    /// Hermitian PSD matrices on the layout, as real coordinates.
    Psd(SystemLayout),
    /// The ball `‖x‖₁ ≤ radius`. Not a cone; infeasibility tests use its
    /// support function.
    L1Ball(f64),
}

impl Cone {
    pub fn name(&self) -> &'static str {
        match self {
            Cone::Free => "free",
            Cone::Nonneg => "nonneg",
            Cone::Psd(_) => "psd",
            Cone::L1Ball(_) => "l1ball",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: String,
    pub cone: Cone,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockId(pub usize);

/// `Σ coeff·x[var] = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub blocks: Vec<Block>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<f64>,
    pub sense: Sense,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0]
    }

    /// Largest violation of the equality constraints at `x`.
    pub fn equality_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| (c.terms.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - c.rhs).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest cone slack of `x` (negative when outside some cone).
    pub fn cone_violation(&self, x: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            let v = &x[b.offset..b.offset + b.len];
            match &b.cone {
                Cone::Free => {}
                Cone::Nonneg => worst = v.iter().fold(worst, |w, &a| w.min(a)),
                Cone::Psd(layout) => {
                    let m = CoordMap::new(layout).from_coords(v);
                    worst = worst.min(herm_eig(&m)?.values[0]);
                }
                Cone::L1Ball(radius) => {
                    worst = worst.min(radius - v.iter().map(|a| a.abs()).sum::<f64>())
                }
            }
        }
        Ok(worst)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ProgramBuilder {
    blocks: Vec<Block>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    maximize: bool,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: &str, cone: Cone, len: usize) -> Result<BlockId> {
        if let Cone::Psd(layout) = &cone {
            let d = layout.dim();
            if len != d * d {
                return Err(Error::DimensionMismatch {
                    expected: d * d,
                    found: len,
                });
            }
        }
        if self.blocks.iter().any(|b| b.name == name) {
            return Err(Error::DuplicateLabel(name.to_string()));
        }
        let offset = self.objective.len();
        self.blocks.push(Block {
            name: name.to_string(),
            cone,
            offset,
            len,
        });
        self.objective.resize(offset + len, 0.0);
        Ok(BlockId(self.blocks.len() - 1))
    }

    pub fn psd(&mut self, name: &str, layout: &SystemLayout) -> Result<BlockId> {
        let d = layout.dim();
        self.add_block(name, Cone::Psd(layout.clone()), d * d)
    }

    pub fn free(&mut self, name: &str, len: usize) -> Result<BlockId> {
        self.add_block(name, Cone::Free, len)
    }

    pub fn nonneg(&mut self, name: &str, len: usize) -> Result<BlockId> {
        self.add_block(name, Cone::Nonneg, len)
    }

    pub fn l1_ball(&mut self, name: &str, len: usize, radius: f64) -> Result<BlockId> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Invalid(alloc::format!("ℓ1 radius {radius}")));
        }
        self.add_block(name, Cone::L1Ball(radius), len)
    }

    /// Global variable index of `block[idx]`.
    pub fn var(&self, id: BlockId, idx: usize) -> usize {
        let b = &self.blocks[id.0];
        debug_assert!(idx < b.len);
        b.offset + idx
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0]
    }

    /// Adds `Σ terms = rhs`; returns the constraint index.
    pub fn constrain(&mut self, terms: Vec<(usize, f64)>, rhs: f64) -> Result<usize> {
        let n = self.objective.len();
        if let Some(&(j, _)) = terms.iter().find(|(j, _)| *j >= n) {
            return Err(Error::OutOfRange(alloc::format!("variable {j} of {n}")));
        }
        if terms.iter().any(|(_, v)| !v.is_finite()) || !rhs.is_finite() {
            return Err(Error::Invalid("non-finite constraint coefficient".into()));
        }
        self.constraints.push(Constraint { terms, rhs });
        Ok(self.constraints.len() - 1)
    }

    pub fn add_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] += coeff;
    }

    pub fn maximize(&mut self) {
        self.maximize = true;
    }

    pub fn build(self) -> ConicProgram {
        ConicProgram {
            blocks: self.blocks,
            constraints: self.constraints,
            objective: self.objective,
            sense: if self.maximize {
                Sense::Maximize
            } else {
                Sense::Minimize
            },
        }
    }
}

/// Epigraph of an ℓ1 norm: `r = u − v` with `u, v ≥ 0`, so that
/// `Σ (u + v) ≥ ‖r‖₁` with equality at an optimum.
#[derive(Clone, Copy, Debug)]
pub struct L1Epigraph {
    pub plus: BlockId,
    pub minus: BlockId,
    pub len: usize,
}

pub fn l1_epigraph(b: &mut ProgramBuilder, name: &str, len: usize) -> Result<L1Epigraph> {
    let plus = b.nonneg(&alloc::format!("{name}_plus"), len)?;
    let minus = b.nonneg(&alloc::format!("{name}_minus"), len)?;
    Ok(L1Epigraph { plus, minus, len })
}

impl L1Epigraph {
    /// Terms of `−r_i`; append to a row `expr − r_i = rhs`.
    pub fn residual_terms(&self, b: &ProgramBuilder, i: usize) -> [(usize, f64); 2] {
        [(b.var(self.plus, i), -1.0), (b.var(self.minus, i), 1.0)]
    }

    /// Terms of `weight·Σ (u + v)`.
    pub fn sum_terms(&self, b: &ProgramBuilder, weight: f64) -> Vec<(usize, f64)> {
        (0..self.len)
            .flat_map(|i| {
                [
                    (b.var(self.plus, i), weight),
                    (b.var(self.minus, i), weight),
                ]
            })
            .collect()
    }
}

/// Requires `expr_j − P_j = rhs_j` on every coordinate `j` of `subspace`
/// for a fresh PSD block `P`. With `expr` the coordinates of an operator `G`
/// and `rhs = 0` this says `G ∈ P + subspace^⊥`, i.e. `G` lies in the dual
/// cone of `PSD ∩ subspace`.
pub fn dual_cone_membership(
    b: &mut ProgramBuilder,
    name: &str,
    subspace: &CoordSubspace,
    mut expr: impl FnMut(&ProgramBuilder, usize) -> Vec<(usize, f64)>,
    rhs: impl Fn(usize) -> f64,
) -> Result<BlockId> {
    let layout = subspace.layout.clone();
    let p = b.psd(name, &layout)?;
    for j in subspace.indices() {
        let mut terms = expr(b, j);
        terms.push((b.var(p, j), -1.0));
        b.constrain(terms, rhs(j))?;
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_infeasible: f64,
    pub max_iter: usize,
    pub rho: f64,
    /// Penalty multiplier for equality rows.
    pub rho_eq_scale: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub scaling_iters: usize,
    pub check_every: usize,
    pub infeasibility_window: usize,
    /// Rescale ρ when primal and dual residuals drift apart by this factor.
    /// Values ≤ 1 keep ρ fixed.
    pub adapt_rho: f64,
    /// Minimum iterations between two ρ updates.
    pub adapt_interval: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            eps_infeasible: 1e-5,
            max_iter: 50_000,
            rho: 1.0,
            rho_eq_scale: 1e3,
            sigma: 1e-6,
            alpha: 1.6,
            scaling_iters: 15,
            check_every: 25,
            infeasibility_window: 500,
            adapt_rho: 5.0,
            adapt_interval: 100,
        }
    }
}

impl SolverSettings {
    pub fn with_tolerance(mut self, eps: f64) -> Self {
        self.eps_abs = eps;
        self.eps_rel = eps;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    Infeasible,
    MaxIterations,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Solved => "solved",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Multipliers of the equality constraints, `c + Aᵀy + (cone part) = 0`.
    pub duals: Vec<f64>,
    /// Objective in the program's own sense.
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl Solution {
    pub fn block<'a>(&'a self, program: &ConicProgram, id: BlockId) -> &'a [f64] {
        let b = program.block(id);
        &self.x[b.offset..b.offset + b.len]
    }

    pub fn require_solved(self) -> Result<Self> {
        match self.status {
            SolveStatus::Solved => Ok(self),
            s => Err(Error::Solver(alloc::format!(
                "solver stopped with status {} after {} iterations (primal {:.2e}, dual {:.2e})",
                s.name(),
                self.iterations,
                self.primal_residual,
                self.dual_residual
            ))),
        }
    }
}

enum SegKind {
    Nonneg,
    Psd(CoordMap),
    L1Ball(f64),
}

/// Contiguous cone rows covering one block.
struct Segment {
    kind: SegKind,
    var_offset: usize,
    row_offset: usize,
    len: usize,
}

struct Scaled {
    n: usize,
    m_eq: usize,
    m: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    segs: Vec<Segment>,
    /// Row scale of every row (equality rows, then cone rows).
    e: Vec<f64>,
    d: Vec<f64>,
    cost_scale: f64,
    /// Cone row of each variable, if any.
    cone_row: Vec<usize>,
}

impl Scaled {
    fn new(p: &ConicProgram, iters: usize) -> Self {
        let n = p.num_vars();
        let m_eq = p.constraints.len();
        let mut row_ptr = vec![0usize];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::with_capacity(m_eq);
        for con in &p.constraints {
            let mut t = con.terms.clone();
            t.sort_by_key(|x| x.0);
            let start = cols.len();
            for (j, v) in t {
                if cols.len() > start && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
            b.push(con.rhs);
        }
        let mut segs = Vec::new();
        let mut cone_row = vec![usize::MAX; n];
        let mut row = m_eq;
        for blk in &p.blocks {
            let kind = match &blk.cone {
                Cone::Free => continue,
                Cone::Nonneg => SegKind::Nonneg,
                Cone::Psd(layout) => SegKind::Psd(CoordMap::new(layout)),
                Cone::L1Ball(radius) => SegKind::L1Ball(*radius),
            };
            for k in 0..blk.len {
                cone_row[blk.offset + k] = row + k;
            }
            segs.push(Segment {
                kind,
                var_offset: blk.offset,
                row_offset: row,
                len: blk.len,
            });
            row += blk.len;
        }
        let m = row;
        let sign = if p.sense == Sense::Maximize {
            -1.0
        } else {
            1.0
        };
        let c: Vec<f64> = p.objective.iter().map(|v| sign * v).collect();
        let mut s = Scaled {
            n,
            m_eq,
            m,
            row_ptr,
            cols,
            vals,
            b,
            c,
            segs,
            e: vec![1.0; m],
            d: vec![1.0; n],
            cost_scale: 1.0,
            cone_row,
        };
        s.equilibrate(iters);
        s
    }

    fn equilibrate(&mut self, iters: usize) {
        let clamp = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
        let (n, m_eq) = (self.n, self.m_eq);
        for _ in 0..iters {
            let mut cn = vec![0.0f64; n];
            for k in 0..self.vals.len() {
                let j = self.cols[k];
                cn[j] = cn[j].max(self.vals[k].abs());
            }
            for j in 0..n {
                let r = self.cone_row[j];
                if r != usize::MAX {
                    cn[j] = cn[j].max(self.cone_coeff(r, j));
                }
            }
            let f: Vec<f64> = cn.iter().map(|&v| 1.0 / clamp(v).sqrt()).collect();
            for j in 0..n {
                self.d[j] *= f[j];
            }
            for k in 0..self.vals.len() {
                self.vals[k] *= f[self.cols[k]];
            }
            for i in 0..m_eq {
                let row = self.row_ptr[i]..self.row_ptr[i + 1];
                let rn = self.vals[row.clone()]
                    .iter()
                    .fold(0.0f64, |a, v| a.max(v.abs()));
                let f = 1.0 / clamp(rn).sqrt();
                self.e[i] *= f;
                self.vals[row].iter_mut().for_each(|v| *v *= f);
            }
            // cone entries are e_row·d_var; a PSD block shares one row scale
            for si in 0..self.segs.len() {
                let (ro, vo, len) = (
                    self.segs[si].row_offset,
                    self.segs[si].var_offset,
                    self.segs[si].len,
                );
                match self.segs[si].kind {
                    SegKind::Nonneg => {
                        for k in 0..len {
                            self.e[ro + k] /= clamp(self.e[ro + k] * self.d[vo + k]).sqrt();
                        }
                    }
                    SegKind::Psd(_) | SegKind::L1Ball(_) => {
                        let mean = (0..len)
                            .map(|k| self.e[ro + k] * self.d[vo + k])
                            .sum::<f64>()
                            / len as f64;
                        let f = 1.0 / clamp(mean).sqrt();
                        self.e[ro..ro + len].iter_mut().for_each(|v| *v *= f);
                    }
                }
            }
        }
        for i in 0..m_eq {
            self.b[i] *= self.e[i];
        }
        let dc = self
            .c
            .iter()
            .zip(&self.d)
            .fold(0.0f64, |a, (c, d)| a.max((c * d).abs()));
        self.cost_scale = if dc > 1e-12 {
            (1.0 / dc).clamp(1e-4, 1e4)
        } else {
            1.0
        };
        for j in 0..n {
            self.c[j] *= self.cost_scale * self.d[j];
        }
    }

    fn cone_coeff(&self, row: usize, var: usize) -> f64 {
        self.e[row] * self.d[var]
    }

    /// `out = Â x`.
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.m_eq {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            out[i] = s;
        }
        for seg in &self.segs {
            for k in 0..seg.len {
                let (r, j) = (seg.row_offset + k, seg.var_offset + k);
                out[r] = self.cone_coeff(r, j) * x[j];
            }
        }
    }

    /// `out = Âᵀ y`.
    fn mul_t(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.m_eq {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k]] += self.vals[k] * yi;
            }
        }
        for seg in &self.segs {
            for k in 0..seg.len {
                let (r, j) = (seg.row_offset + k, seg.var_offset + k);
                out[j] += self.cone_coeff(r, j) * y[r];
            }
        }
    }

    /// Euclidean projection onto `{b} × cones`, in place.
    fn project(&self, z: &mut [f64]) -> Result<()> {
        z[..self.m_eq].copy_from_slice(&self.b);
        for seg in &self.segs {
            let v = &mut z[seg.row_offset..seg.row_offset + seg.len];
            match &seg.kind {
                SegKind::Nonneg => v.iter_mut().for_each(|a| *a = a.max(0.0)),
                SegKind::Psd(map) => {
                    let e = herm_eig(&map.from_coords(v))?;
                    if e.values[0] < 0.0 {
                        let p = e.reconstruct(|x| x.max(0.0));
                        v.copy_from_slice(&map.to_coords(&p));
                    }
                }
                // rows of the block share one scale, so the ball scales with it
                SegKind::L1Ball(radius) => project_l1(v, radius * self.e[seg.row_offset]),
            }
        }
        Ok(())
    }
}

/// Euclidean projection onto `‖v‖₁ ≤ radius` by soft thresholding.
fn project_l1(v: &mut [f64], radius: f64) {
    if v.iter().map(|a| a.abs()).sum::<f64>() <= radius {
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|a| a.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let (mut cum, mut theta) = (0.0, 0.0);
    for (k, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - radius) / (k + 1) as f64;
        if t >= m {
            break;
        }
        theta = t;
    }
    v.iter_mut()
        .for_each(|a| *a = a.signum() * (a.abs() - theta).max(0.0));
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Solves a conic program with an operator-splitting (ADMM) method.
///
/// Returns `Infeasible` when the dual iterates diverge along a primal
/// infeasibility certificate.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<Solution> {
    let s = Scaled::new(program, settings.scaling_iters);
    let (n, m, m_eq) = (s.n, s.m, s.m_eq);
    let mut rho_c = settings.rho;
    let mut rho = vec![0.0; m];
    let mut kkt = factor(&s, settings, rho_c, &mut rho)?;

    let mut x = vec![0.0; n];
    let mut z = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut xt = vec![0.0; n];
    let mut zt = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mut ax = vec![0.0; m];
    let mut aty = vec![0.0; n];
    let mut y_snap = vec![0.0; m];
    s.project(&mut z)?;

    let alpha = settings.alpha;
    let mut status = SolveStatus::MaxIterations;
    let (mut prim, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iter = 0;
    let mut last_update = 0;
    while iter < settings.max_iter {
        iter += 1;
        for i in 0..m {
            w[i] = rho[i] * z[i] - y[i];
        }
        s.mul_t(&w, &mut xt);
        for j in 0..n {
            xt[j] += settings.sigma * x[j] - s.c[j];
        }
        kkt.solve(&mut xt);
        s.mul(&xt, &mut zt);
        for j in 0..n {
            x[j] = alpha * xt[j] + (1.0 - alpha) * x[j];
        }
        for i in 0..m {
            zt[i] = alpha * zt[i] + (1.0 - alpha) * z[i];
            w[i] = zt[i] + y[i] / rho[i];
        }
        s.project(&mut w)?;
        for i in 0..m {
            y[i] += rho[i] * (zt[i] - w[i]);
        }
        core::mem::swap(&mut z, &mut w);

        if iter % settings.check_every != 0 && iter != settings.max_iter {
            continue;
        }
        s.mul(&x, &mut ax);
        s.mul_t(&y, &mut aty);
        let inv_c = 1.0 / s.cost_scale;
        prim = (0..m)
            .map(|i| ((ax[i] - z[i]) / s.e[i]).abs())
            .fold(0.0, f64::max);
        let eps_p = settings.eps_abs
            + settings.eps_rel
                * (0..m)
                    .map(|i| (ax[i] / s.e[i]).abs().max((z[i] / s.e[i]).abs()))
                    .fold(0.0, f64::max);
        dual = (0..n)
            .map(|j| (inv_c * (s.c[j] + aty[j]) / s.d[j]).abs())
            .fold(0.0, f64::max);
        let eps_d = settings.eps_abs
            + settings.eps_rel
                * inv_c
                * (0..n)
                    .map(|j| (aty[j] / s.d[j]).abs().max((s.c[j] / s.d[j]).abs()))
                    .fold(0.0, f64::max);
        if !prim.is_finite() || !dual.is_finite() {
            return Err(Error::Numerical("solver iterates diverged".into()));
        }
        if prim <= eps_p && dual <= eps_d {
            status = SolveStatus::Solved;
            break;
        }
        if iter % settings.infeasibility_window == 0 {
            let dy: Vec<f64> = y.iter().zip(&y_snap).map(|(a, b)| a - b).collect();
            y_snap.copy_from_slice(&y);
            if infeasibility_certificate(&s, &dy, settings.eps_infeasible)? {
                status = SolveStatus::Infeasible;
                break;
            }
        }
        if settings.adapt_rho > 1.0 && iter - last_update >= settings.adapt_interval {
            let ratio = (prim / dual.max(1e-30)).sqrt();
            if ratio > settings.adapt_rho || ratio * settings.adapt_rho < 1.0 {
                rho_c = (rho_c * ratio).clamp(1e-6, 1e6);
                kkt = factor(&s, settings, rho_c, &mut rho)?;
                last_update = iter;
            }
        }
    }

    let xs: Vec<f64> = x.iter().zip(&s.d).map(|(a, d)| a * d).collect();
    let duals: Vec<f64> = (0..m_eq).map(|i| y[i] * s.e[i] / s.cost_scale).collect();
    let objective = program.objective_value(&xs);
    Ok(Solution {
        status,
        x: xs,
        duals,
        objective,
        iterations: iter,
        primal_residual: prim,
        dual_residual: dual,
    })
}

/// Fills the per-row penalties for cone penalty `rho_c` and factors the
/// matching KKT system.
fn factor(s: &Scaled, settings: &SolverSettings, rho_c: f64, rho: &mut [f64]) -> Result<Kkt> {
    let rho_eq = rho_c * settings.rho_eq_scale;
    for (i, r) in rho.iter_mut().enumerate() {
        *r = if i < s.m_eq { rho_eq } else { rho_c };
    }
    let mut diag = vec![settings.sigma; s.n];
    for seg in &s.segs {
        for k in 0..seg.len {
            let (r, j) = (seg.row_offset + k, seg.var_offset + k);
            diag[j] += rho[r] * s.cone_coeff(r, j).powi(2);
        }
    }
    let rows: Vec<SparseRow<'_>> = (0..s.m_eq)
        .map(|i| SparseRow {
            cols: &s.cols[s.row_ptr[i]..s.row_ptr[i + 1]],
            vals: &s.vals[s.row_ptr[i]..s.row_ptr[i + 1]],
            weight: rho_eq,
        })
        .collect();
    Kkt::new(s.n, &diag, &rows)
}

/// `δy` certifies infeasibility when `Aᵀδy ≈ 0`, `δy` lies in the polar of
/// the cones and `bᵀδy` plus the support function of the bounded sets is
/// negative, all relative to `‖δy‖`.
fn infeasibility_certificate(s: &Scaled, dy_hat: &[f64], eps: f64) -> Result<bool> {
    let dy: Vec<f64> = dy_hat.iter().zip(&s.e).map(|(a, e)| a * e).collect();
    let norm = inf_norm(&dy);
    if norm < 1e-10 {
        return Ok(false);
    }
    let mut at = vec![0.0; s.n];
    s.mul_t(dy_hat, &mut at);
    let at_norm = at
        .iter()
        .zip(&s.d)
        .fold(0.0f64, |a, (v, d)| a.max((v / d).abs()));
    if at_norm > eps * norm {
        return Ok(false);
    }
    let mut support: f64 = (0..s.m_eq).map(|i| s.b[i] * dy_hat[i]).sum();
    for seg in &s.segs {
        if let SegKind::L1Ball(radius) = seg.kind {
            support += radius
                * s.e[seg.row_offset]
                * inf_norm(&dy_hat[seg.row_offset..seg.row_offset + seg.len]);
        }
    }
    if support >= -eps * norm {
        return Ok(false);
    }
    for seg in &s.segs {
        let v = &dy[seg.row_offset..seg.row_offset + seg.len];
        let top = match &seg.kind {
            SegKind::Nonneg => v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
            SegKind::Psd(map) => *herm_eig(&map.from_coords(v))?.values.last().unwrap(),
            SegKind::L1Ball(_) => continue,
        };
        if top > eps * norm {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsys::Label;

    fn qubit() -> SystemLayout {
        SystemLayout::new(vec![(Label::Pt, 2)]).unwrap()
    }

    #[test]
    fn tiny_linear_program() {
        // min x + 2y, x + y = 1, x,y ≥ 0
        let mut b = ProgramBuilder::new();
        let v = b.nonneg("v", 2).unwrap();
        b.constrain(vec![(b.var(v, 0), 1.0), (b.var(v, 1), 1.0)], 1.0)
            .unwrap();
        b.add_objective(b.var(v, 0), 1.0);
        b.add_objective(b.var(v, 1), 2.0);
        let p = b.build();
        let sol = solve(&p, &SolverSettings::default())
            .unwrap()
            .require_solved()
            .unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-6, "{}", sol.objective);
    }

    #[test]
    fn smallest_eigenvalue_sdp() {
        // min Tr(C X), Tr X = 1, X ⪰ 0 gives λ_min(C); C = diag(1, 3) + 0.5·X
        let layout = qubit();
        let mut b = ProgramBuilder::new();
        let x = b.psd("X", &layout).unwrap();
        // coordinates over (I, X, Y, Z)/√2: Tr X = √2·x0
        b.constrain(vec![(b.var(x, 0), 2f64.sqrt())], 1.0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        // C = 2I − Z + 0.5·X has coordinates (2√2, 0.5√2, 0, −√2)
        for (k, cval) in [(0, 2.0 / s), (1, 0.5 / s), (3, -1.0 / s)] {
            b.add_objective(b.var(x, k), cval);
        }
        let p = b.build();
        let sol = solve(&p, &SolverSettings::default())
            .unwrap()
            .require_solved()
            .unwrap();
        let expect = 2.0 - (1.0f64 + 0.25).sqrt();
        assert!(
            (sol.objective - expect).abs() < 1e-6,
            "{} vs {expect}",
            sol.objective
        );
        assert!(p.cone_violation(&sol.x).unwrap() > -1e-7);
    }

    #[test]
    fn detects_infeasibility() {
        // x ≥ 0, x = −1
        let mut b = ProgramBuilder::new();
        let v = b.nonneg("v", 1).unwrap();
        b.constrain(vec![(b.var(v, 0), 1.0)], -1.0).unwrap();
        let sol = solve(&b.build(), &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);

        // PSD with negative trace
        let mut b = ProgramBuilder::new();
        let x = b.psd("X", &qubit()).unwrap();
        b.constrain(vec![(b.var(x, 0), 1.0)], -0.5).unwrap();
        b.add_objective(b.var(x, 3), 1.0);
        let sol = solve(&b.build(), &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn l1_fit() {
        // min |x − 1| + |x − 3| + |x − 4| over free x: median 3, value 3
        let mut b = ProgramBuilder::new();
        let x = b.free("x", 1).unwrap();
        let l1 = l1_epigraph(&mut b, "r", 3).unwrap();
        for (i, t) in [1.0, 3.0, 4.0].iter().enumerate() {
            let mut terms = vec![(b.var(x, 0), 1.0)];
            terms.extend(l1.residual_terms(&b, i));
            b.constrain(terms, *t).unwrap();
        }
        for (j, w) in l1.sum_terms(&b, 1.0) {
            b.add_objective(j, w);
        }
        let p = b.build();
        let sol = solve(&p, &SolverSettings::default())
            .unwrap()
            .require_solved()
            .unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-6);
        assert!((sol.block(&p, x)[0] - 3.0).abs() < 1e-4);
    }

    #[test]
    fn maximize_sense() {
        let mut b = ProgramBuilder::new();
        let v = b.nonneg("v", 2).unwrap();
        b.constrain(vec![(b.var(v, 0), 1.0), (b.var(v, 1), 2.0)], 4.0)
            .unwrap();
        b.add_objective(b.var(v, 0), 1.0);
        b.add_objective(b.var(v, 1), 3.0);
        b.maximize();
        let sol = solve(&b.build(), &SolverSettings::default())
            .unwrap()
            .require_solved()
            .unwrap();
        assert!((sol.objective - 6.0).abs() < 1e-6, "{}", sol.objective);
    }
}
