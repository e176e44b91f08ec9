//! Factorization of `N = diag(d) + Σ_i ρ_i a_i a_iᵀ`.
//!
//! Variables are split into a set `D` of highly coupled variables and small
//! connected components of the rest. Components are eliminated with dense
//! Cholesky factors, `D` is handled by a dense Schur complement, and rows with
//! many nonzeros are added back through the Woodbury identity.

use alloc::vec;
use alloc::vec::Vec;

use faer::{Mat, Side};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

const MAX_COMPONENT: usize = 256;
const DENSE_ROW_NNZ: usize = 1024;

pub(crate) struct SparseRow<'a> {
    pub cols: &'a [usize],
    pub vals: &'a [f64],
    pub weight: f64,
}

struct Component {
    vars: Vec<usize>,
    /// Lower Cholesky factor of the component block, row-major `s×s`.
    l: Vec<f64>,
    /// Positions in `D` coupled to this component, sorted.
    dn: Vec<usize>,
    /// `L⁻¹ N_cD`, row-major `s×|dn|`.
    x: Vec<f64>,
}

pub(crate) struct Kkt {
    n: usize,
    comps: Vec<Component>,
    dset: Vec<usize>,
    schur: Option<Mat<f64>>,
    /// Columns `√ρ a` of the dense rows, and `N0⁻¹` applied to them.
    dense_u: Vec<Vec<(usize, f64)>>,
    dense_z: Vec<Vec<f64>>,
    cap: Option<Mat<f64>>,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }
    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
    }
}

fn components(n: usize, rows: &[SparseRow<'_>], in_d: &[bool]) -> UnionFind {
    let mut uf = UnionFind::new(n);
    for r in rows {
        let mut first = None;
        for &j in r.cols {
            if in_d[j] {
                continue;
            }
            match first {
                None => first = Some(j),
                Some(f) => uf.union(f, j),
            }
        }
    }
    uf
}

fn max_component(n: usize, rows: &[SparseRow<'_>], in_d: &[bool]) -> usize {
    let mut uf = components(n, rows, in_d);
    (0..n)
        .filter(|&j| !in_d[j])
        .map(|j| {
            let r = uf.find(j);
            uf.size[r]
        })
        .max()
        .unwrap_or(0)
}

/// Dense lower Cholesky in place; `a` is row-major `s×s`.
fn cholesky(a: &mut [f64], s: usize) -> Result<()> {
    for j in 0..s {
        let mut d = a[j * s + j];
        for k in 0..j {
            d -= a[j * s + k] * a[j * s + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Numerical(
                "normal matrix is not positive definite".into(),
            ));
        }
        let d = d.sqrt();
        a[j * s + j] = d;
        for i in j + 1..s {
            let mut v = a[i * s + j];
            for k in 0..j {
                v -= a[i * s + k] * a[j * s + k];
            }
            a[i * s + j] = v / d;
        }
        for k in j + 1..s {
            a[j * s + k] = 0.0;
        }
    }
    Ok(())
}

fn forward(l: &[f64], s: usize, b: &mut [f64]) {
    for i in 0..s {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * s + k] * b[k];
        }
        b[i] = v / l[i * s + i];
    }
}

fn backward(l: &[f64], s: usize, b: &mut [f64]) {
    for i in (0..s).rev() {
        let mut v = b[i];
        for k in i + 1..s {
            v -= l[k * s + i] * b[k];
        }
        b[i] = v / l[i * s + i];
    }
}

impl Kkt {
    pub fn new(n: usize, diag: &[f64], rows: &[SparseRow<'_>]) -> Result<Self> {
        let (dense_rows, sparse_rows): (Vec<&SparseRow<'_>>, Vec<&SparseRow<'_>>) =
            rows.iter().partition(|r| r.cols.len() > DENSE_ROW_NNZ);
        let sparse: Vec<SparseRow<'_>> = sparse_rows
            .iter()
            .map(|r| SparseRow {
                cols: r.cols,
                vals: r.vals,
                weight: r.weight,
            })
            .collect();

        // choose D: the k highest-coupling variables, k minimal so that
        // every remaining component is small
        let mut degree = vec![0usize; n];
        for r in &sparse {
            for &j in r.cols {
                degree[j] += r.cols.len() - 1;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then(a.cmp(&b)));
        let mark = |k: usize| {
            let mut in_d = vec![false; n];
            for &j in &order[..k] {
                in_d[j] = true;
            }
            in_d
        };
        let (mut lo, mut hi) = (0usize, n);
        if max_component(n, &sparse, &mark(0)) <= MAX_COMPONENT {
            hi = 0;
        }
        while lo < hi {
            let mid = (lo + hi) / 2;
            if max_component(n, &sparse, &mark(mid)) <= MAX_COMPONENT {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let in_d = mark(hi);
        let mut dset: Vec<usize> = order[..hi].to_vec();
        dset.sort_unstable();
        let mut dpos = vec![usize::MAX; n];
        for (p, &j) in dset.iter().enumerate() {
            dpos[j] = p;
        }

        let mut uf = components(n, &sparse, &in_d);
        let mut root_comp = vec![usize::MAX; n];
        let mut var_loc = vec![(usize::MAX, usize::MAX); n];
        let mut comps: Vec<Component> = Vec::new();
        for j in 0..n {
            if in_d[j] {
                continue;
            }
            let r = uf.find(j);
            if root_comp[r] == usize::MAX {
                root_comp[r] = comps.len();
                comps.push(Component {
                    vars: Vec::new(),
                    l: Vec::new(),
                    dn: Vec::new(),
                    x: Vec::new(),
                });
            }
            let ci = root_comp[r];
            var_loc[j] = (ci, comps[ci].vars.len());
            comps[ci].vars.push(j);
        }
        // D-neighbours of each component
        for r in &sparse {
            let mut cs: Vec<usize> = r
                .cols
                .iter()
                .filter(|&&j| !in_d[j])
                .map(|&j| var_loc[j].0)
                .collect();
            cs.dedup();
            if cs.is_empty() {
                continue;
            }
            let ci = cs[0];
            for &j in r.cols {
                if in_d[j] {
                    comps[ci].dn.push(dpos[j]);
                }
            }
        }
        for c in comps.iter_mut() {
            c.dn.sort_unstable();
            c.dn.dedup();
            let s = c.vars.len();
            c.l = vec![0.0; s * s];
            c.x = vec![0.0; s * c.dn.len()];
            for (li, &j) in c.vars.iter().enumerate() {
                c.l[li * s + li] = diag[j];
            }
        }
        let nd = dset.len();
        let mut ndd = if nd > 0 {
            Some(Mat::<f64>::zeros(nd, nd))
        } else {
            None
        };
        if let Some(m) = ndd.as_mut() {
            for (p, &j) in dset.iter().enumerate() {
                m[(p, p)] = diag[j];
            }
        }
        for r in &sparse {
            let w = r.weight;
            for (a, &p) in r.cols.iter().enumerate() {
                let vp = r.vals[a] * w;
                for (b, &q) in r.cols.iter().enumerate() {
                    let v = vp * r.vals[b];
                    match (in_d[p], in_d[q]) {
                        (true, true) => {
                            if let Some(m) = ndd.as_mut() {
                                m[(dpos[p], dpos[q])] += v;
                            }
                        }
                        (false, false) => {
                            let (ci, lp) = var_loc[p];
                            let (_, lq) = var_loc[q];
                            let s = comps[ci].vars.len();
                            comps[ci].l[lp * s + lq] += v;
                        }
                        (false, true) => {
                            let (ci, lp) = var_loc[p];
                            let c = &mut comps[ci];
                            let k = c.dn.len();
                            let col = c.dn.binary_search(&dpos[q]).expect("neighbour recorded");
                            c.x[lp * k + col] += v;
                        }
                        (true, false) => {}
                    }
                }
            }
        }
        for c in comps.iter_mut() {
            let s = c.vars.len();
            cholesky(&mut c.l, s)?;
            let k = c.dn.len();
            if k == 0 {
                continue;
            }
            // X = L⁻¹ N_cD, column by column
            let mut col = vec![0.0; s];
            for t in 0..k {
                for i in 0..s {
                    col[i] = c.x[i * k + t];
                }
                forward(&c.l, s, &mut col);
                for i in 0..s {
                    c.x[i * k + t] = col[i];
                }
            }
            if let Some(m) = ndd.as_mut() {
                for a in 0..k {
                    for b in 0..k {
                        let mut v = 0.0;
                        for i in 0..s {
                            v += c.x[i * k + a] * c.x[i * k + b];
                        }
                        m[(c.dn[a], c.dn[b])] -= v;
                    }
                }
            }
        }
        let schur = match ndd {
            Some(m) => {
                let llt = m
                    .llt(Side::Lower)
                    .map_err(|e| Error::Numerical(alloc::format!("Schur complement: {e:?}")))?;
                Some(llt.L().to_owned())
            }
            None => None,
        };
        let mut kkt = Kkt {
            n,
            comps,
            dset,
            schur,
            dense_u: Vec::new(),
            dense_z: Vec::new(),
            cap: None,
        };

        if !dense_rows.is_empty() {
            let u: Vec<Vec<(usize, f64)>> = dense_rows
                .iter()
                .map(|r| {
                    let s = r.weight.sqrt();
                    r.cols
                        .iter()
                        .zip(r.vals)
                        .map(|(&j, &v)| (j, v * s))
                        .collect()
                })
                .collect();
            let z: Vec<Vec<f64>> = u
                .iter()
                .map(|col| {
                    let mut b = vec![0.0; n];
                    for &(j, v) in col {
                        b[j] += v;
                    }
                    kkt.solve_base(&mut b);
                    b
                })
                .collect();
            let k = u.len();
            let cap = Mat::<f64>::from_fn(k, k, |a, b| {
                let v: f64 = u[a].iter().map(|&(j, x)| x * z[b][j]).sum();
                v + if a == b { 1.0 } else { 0.0 }
            });
            let llt = cap
                .llt(Side::Lower)
                .map_err(|e| Error::Numerical(alloc::format!("capacitance: {e:?}")))?;
            kkt.cap = Some(llt.L().to_owned());
            kkt.dense_u = u;
            kkt.dense_z = z;
        }
        Ok(kkt)
    }

    /// Solves with the sparse part only.
    fn solve_base(&self, b: &mut [f64]) {
        let nd = self.dset.len();
        let mut bd: Vec<f64> = self.dset.iter().map(|&j| b[j]).collect();
        let mut ys: Vec<Vec<f64>> = Vec::with_capacity(self.comps.len());
        for c in &self.comps {
            let s = c.vars.len();
            let mut y: Vec<f64> = c.vars.iter().map(|&j| b[j]).collect();
            forward(&c.l, s, &mut y);
            let k = c.dn.len();
            for (t, &p) in c.dn.iter().enumerate() {
                let mut v = 0.0;
                for i in 0..s {
                    v += c.x[i * k + t] * y[i];
                }
                bd[p] -= v;
            }
            ys.push(y);
        }
        if let Some(l) = &self.schur {
            let mut rhs = Mat::<f64>::from_fn(nd, 1, |i, _| bd[i]);
            faer::linalg::triangular_solve::solve_lower_triangular_in_place(
                l.as_ref(),
                rhs.as_mut(),
                faer::Par::Seq,
            );
            faer::linalg::triangular_solve::solve_upper_triangular_in_place(
                l.transpose(),
                rhs.as_mut(),
                faer::Par::Seq,
            );
            for i in 0..nd {
                bd[i] = rhs[(i, 0)];
            }
            for (i, &j) in self.dset.iter().enumerate() {
                b[j] = bd[i];
            }
        }
        for (c, mut y) in self.comps.iter().zip(ys) {
            let s = c.vars.len();
            let k = c.dn.len();
            for i in 0..s {
                let mut v = 0.0;
                for (t, &p) in c.dn.iter().enumerate() {
                    v += c.x[i * k + t] * bd[p];
                }
                y[i] -= v;
            }
            backward(&c.l, s, &mut y);
            for (i, &j) in c.vars.iter().enumerate() {
                b[j] = y[i];
            }
        }
    }

    pub fn solve(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        self.solve_base(b);
        if let Some(cap) = &self.cap {
            let k = self.dense_u.len();
            let mut t = Mat::<f64>::from_fn(k, 1, |a, _| {
                self.dense_u[a].iter().map(|&(j, v)| v * b[j]).sum()
            });
            let llt_solve = |m: &mut Mat<f64>| {
                faer::linalg::triangular_solve::solve_lower_triangular_in_place(
                    cap.as_ref(),
                    m.as_mut(),
                    faer::Par::Seq,
                );
                faer::linalg::triangular_solve::solve_upper_triangular_in_place(
                    cap.transpose(),
                    m.as_mut(),
                    faer::Par::Seq,
                );
            };
            llt_solve(&mut t);
            for a in 0..k {
                let s = t[(a, 0)];
                for (x, z) in b.iter_mut().zip(&self.dense_z[a]) {
                    *x -= s * z;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_matrix(n: usize, diag: &[f64], rows: &[(Vec<usize>, Vec<f64>, f64)]) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = diag[i];
        }
        for (c, v, w) in rows {
            for a in 0..c.len() {
                for b in 0..c.len() {
                    m[c[a]][c[b]] += w * v[a] * v[b];
                }
            }
        }
        m
    }

    fn check(n: usize, rows: Vec<(Vec<usize>, Vec<f64>, f64)>) {
        let diag: Vec<f64> = (0..n).map(|i| 0.5 + (i % 3) as f64).collect();
        let srows: Vec<SparseRow<'_>> = rows
            .iter()
            .map(|(c, v, w)| SparseRow {
                cols: c,
                vals: v,
                weight: *w,
            })
            .collect();
        let kkt = Kkt::new(n, &diag, &srows).unwrap();
        let m = dense_matrix(n, &diag, &rows);
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 17) as f64 - 8.0).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m[i][j] * x[j]).sum())
            .collect();
        kkt.solve(&mut b);
        let err = b
            .iter()
            .zip(&x)
            .map(|(a, c)| (a - c).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "error {err}");
    }

    #[test]
    fn block_diagonal_rows() {
        let rows = (0..50)
            .map(|i| (vec![2 * i, 2 * i + 1], vec![1.0, -2.0], 3.0))
            .collect();
        check(100, rows);
    }

    #[test]
    fn star_coupling_goes_to_schur() {
        // every row couples one private variable with the same 300 hub variables
        let hub: Vec<usize> = (0..300).collect();
        let rows: Vec<_> = (0..400)
            .map(|i| {
                let mut c = hub.clone();
                c.push(300 + i);
                let v: Vec<f64> = c
                    .iter()
                    .map(|&j| ((j * 31 + i * 17) % 11) as f64 / 11.0 - 0.4)
                    .collect();
                (c, v, 2.0)
            })
            .collect();
        check(700, rows);
    }

    #[test]
    fn dense_row_through_woodbury() {
        let mut rows: Vec<_> = (0..600)
            .map(|i| (vec![i, (i + 1) % 1500], vec![1.0, 0.5], 1.0))
            .collect();
        rows.push((
            (0..1500).collect(),
            (0..1500).map(|i| 1.0 + (i % 5) as f64).collect(),
            10.0,
        ));
        check(1500, rows);
    }
}
