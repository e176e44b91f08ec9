//! Tomographic fixtures, setting-operator enumeration and the Born-rule engine.
//!
//! Settings are enumerated lexicographically in `(w, jA, kA, jB, kB, z, a, b, c)`
//! with every index starting at 1.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use faer::{Mat, Side};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::procmat::{CoordSubspace, ProcessMatrix};
use crate::qsys::{c, kron, kron_all, ComplexMatrix, CoordMap, Label, SystemLayout, C64};

const H: f64 = core::f64::consts::FRAC_1_SQRT_2;

pub fn ket(name: &str) -> Result<[C64; 2]> {
    Ok(match name {
        "0" => [c(1.0, 0.0), c(0.0, 0.0)],
        "1" => [c(0.0, 0.0), c(1.0, 0.0)],
        "+" => [c(H, 0.0), c(H, 0.0)],
        "-" => [c(H, 0.0), c(-H, 0.0)],
        "y+" => [c(H, 0.0), c(0.0, H)],
        "y-" => [c(H, 0.0), c(0.0, -H)],
        other => return Err(Error::Invalid(format!("unknown state `{other}`"))),
    })
}

pub fn projector(name: &str) -> Result<ComplexMatrix> {
    Ok(ComplexMatrix::outer(&ket(name)?))
}

fn projs(names: &[&str]) -> Vec<ComplexMatrix> {
    names
        .iter()
        .map(|n| projector(n).expect("known state"))
        .collect()
}

/// `{|0⟩, |1⟩, |+⟩, |y+⟩}` as projectors.
pub fn state_set() -> Vec<ComplexMatrix> {
    projs(&["0", "1", "+", "y+"])
}

/// Effects `M_{i|j}` indexed `[j][i]`: Z, X, Y with the `+1` eigenprojector first.
pub fn measurement_set() -> Vec<Vec<ComplexMatrix>> {
    vec![projs(&["0", "1"]), projs(&["+", "-"]), projs(&["y+", "y-"])]
}

/// Instrument element of a measure-and-reprepare setting.
#[derive(Clone, Debug, PartialEq)]
pub struct InstrumentElement {
    /// Outcome `i ∈ {1,2}`.
    pub i: u8,
    /// Measurement `j ∈ {1,2,3}`.
    pub j: u8,
    /// Repreparation `k ∈ {1..4}`.
    pub k: u8,
    /// `M_{i|j} ⊗ |ψ_k⟩⟨ψ_k|^T`.
    pub operator: ComplexMatrix,
}

fn instruments(
    effects: &[Vec<ComplexMatrix>],
    repreps: &[ComplexMatrix],
) -> Vec<InstrumentElement> {
    let mut out = Vec::with_capacity(24);
    for (j, pair) in effects.iter().enumerate() {
        for (k, psi) in repreps.iter().enumerate() {
            for (i, m) in pair.iter().enumerate() {
                out.push(InstrumentElement {
                    i: i as u8 + 1,
                    j: j as u8 + 1,
                    k: k as u8 + 1,
                    operator: kron(m, &psi.transpose()),
                });
            }
        }
    }
    out
}

/// The 24 elements, ordered by `(j, k, i)`.
pub fn instrument_set() -> Vec<InstrumentElement> {
    instruments(&measurement_set(), &state_set())
}

/// State and effect lists realized by the waveplate settings of the experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentalSets {
    /// `ψ̃_w`: `|0⟩, |1⟩, |−⟩, |y+⟩`.
    pub states: Vec<ComplexMatrix>,
    /// `M̃_{i|j}` indexed `[j][i]`.
    pub effects: Vec<Vec<ComplexMatrix>>,
    /// `φ̃_k`: `|0⟩, |1⟩, |+⟩, |y−⟩`.
    pub repreparations: Vec<ComplexMatrix>,
    /// `C̃_{c|z}` indexed `[z][c]`; the time-bin readout lists `|1⟩` first.
    pub control: Vec<Vec<ComplexMatrix>>,
}

pub fn experimental_sets() -> ExperimentalSets {
    ExperimentalSets {
        states: projs(&["0", "1", "-", "y+"]),
        effects: vec![projs(&["0", "1"]), projs(&["+", "-"]), projs(&["y-", "y+"])],
        repreparations: projs(&["0", "1", "+", "y-"]),
        control: vec![projs(&["1", "0"]), projs(&["y-", "y+"])],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SettingFamily {
    Full,
    Restricted,
}

impl SettingFamily {
    pub fn name(self) -> &'static str {
        match self {
            SettingFamily::Full => "full",
            SettingFamily::Restricted => "restricted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SettingFamily::Full),
            "restricted" => Ok(SettingFamily::Restricted),
            other => Err(Error::Invalid(format!("unknown family `{other}`"))),
        }
    }

    /// Number of future bases.
    pub fn z_count(self) -> u8 {
        match self {
            SettingFamily::Full => 3,
            SettingFamily::Restricted => 2,
        }
    }

    pub fn count(self) -> usize {
        4 * 24 * 24 * 2 * self.z_count() as usize
    }

    /// Normalization groups `(w, x, y, z)`, each holding 8 outcomes.
    pub fn groups(self) -> usize {
        self.count() / 8
    }

    /// Configurations with both future outcomes read simultaneously.
    pub fn configurations(self) -> usize {
        self.count() / 2
    }

    pub fn settings(self) -> impl Iterator<Item = SettingIndex> {
        (0..self.count()).map(move |p| SettingIndex::from_position(p, self).expect("in range"))
    }
}

impl fmt::Display for SettingFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One configuration `(a, b, c | x, y, z, w)`; all fields 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SettingIndex {
    pub w: u8,
    pub ja: u8,
    pub ka: u8,
    pub jb: u8,
    pub kb: u8,
    pub z: u8,
    pub a: u8,
    pub b: u8,
    pub c: u8,
}

impl SettingIndex {
    fn radices(family: SettingFamily) -> [u8; 9] {
        [4, 3, 4, 3, 4, family.z_count(), 2, 2, 2]
    }

    fn fields(&self) -> [u8; 9] {
        [
            self.w, self.ja, self.ka, self.jb, self.kb, self.z, self.a, self.b, self.c,
        ]
    }

    pub fn check(&self, family: SettingFamily) -> Result<()> {
        for (v, r) in self.fields().iter().zip(Self::radices(family)) {
            if *v < 1 || *v > r {
                return Err(Error::OutOfRange(format!(
                    "{self:?} in the {family} family"
                )));
            }
        }
        Ok(())
    }

    pub fn position(&self, family: SettingFamily) -> Result<usize> {
        self.check(family)?;
        Ok(self
            .fields()
            .iter()
            .zip(Self::radices(family))
            .fold(0, |acc, (v, r)| acc * r as usize + (*v - 1) as usize))
    }

    pub fn from_position(mut pos: usize, family: SettingFamily) -> Result<Self> {
        if pos >= family.count() {
            return Err(Error::OutOfRange(format!(
                "position {pos} in the {family} family"
            )));
        }
        let radices = Self::radices(family);
        let mut f = [0u8; 9];
        for k in (0..9).rev() {
            f[k] = (pos % radices[k] as usize) as u8 + 1;
            pos /= radices[k] as usize;
        }
        Ok(Self {
            w: f[0],
            ja: f[1],
            ka: f[2],
            jb: f[3],
            kb: f[4],
            z: f[5],
            a: f[6],
            b: f[7],
            c: f[8],
        })
    }

    /// Normalization group `(w, x, y, z)`: position divided by the 8 outcomes.
    pub fn group(&self, family: SettingFamily) -> Result<usize> {
        Ok(self.position(family)? / 8)
    }
}

/// Local operators making up the setting operators of one family.
#[derive(Clone, Debug)]
pub struct Fixtures {
    pub family: SettingFamily,
    /// `ρ_w^T`.
    pub past: Vec<ComplexMatrix>,
    /// Instrument elements ordered by `(j, k, i)`.
    pub party: Vec<InstrumentElement>,
    /// Future effects indexed `[z][c]`.
    pub future: Vec<Vec<ComplexMatrix>>,
}

impl Fixtures {
    pub fn new(family: SettingFamily) -> Self {
        match family {
            SettingFamily::Full => Self {
                family,
                past: state_set().iter().map(|s| s.transpose()).collect(),
                party: instrument_set(),
                future: measurement_set(),
            },
            SettingFamily::Restricted => {
                let e = experimental_sets();
                Self {
                    family,
                    past: e.states.iter().map(|s| s.transpose()).collect(),
                    party: instruments(&e.effects, &e.repreparations),
                    future: e.control,
                }
            }
        }
    }

    pub(crate) fn party_index(j: u8, k: u8, i: u8) -> usize {
        ((j as usize - 1) * 4 + (k as usize - 1)) * 2 + (i as usize - 1)
    }

    pub fn operator(&self, idx: &SettingIndex) -> Result<ComplexMatrix> {
        idx.check(self.family)?;
        let p = &self.past[idx.w as usize - 1];
        let a = &self.party[Self::party_index(idx.ja, idx.ka, idx.a)].operator;
        let b = &self.party[Self::party_index(idx.jb, idx.kb, idx.b)].operator;
        let f = &self.future[idx.z as usize - 1][idx.c as usize - 1];
        Ok(kron_all(&[p, a, b, f]))
    }
}

/// `ρ^T ⊗ R_A ⊗ R_B ⊗ M_F` on the simplified layout.
pub fn setting_operator(idx: &SettingIndex, family: SettingFamily) -> Result<ComplexMatrix> {
    Fixtures::new(family).operator(idx)
}

pub const BORN_TOL: f64 = 1e-10;

/// `Tr(W·S)`, clamped to `[0, 1]` once inside the tolerance band.
pub fn born_probability(
    w: &ProcessMatrix,
    idx: &SettingIndex,
    family: SettingFamily,
) -> Result<f64> {
    if w.layout != SystemLayout::simplified_switch() {
        return Err(Error::UnsupportedLayout(format!("{}", w.layout)));
    }
    let s = setting_operator(idx, family)?;
    let p = w.matrix.trace_product_re(&s);
    if !(-BORN_TOL..=1.0 + BORN_TOL).contains(&p) {
        return Err(Error::Numerical(format!("probability {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Local coordinate vectors of one family: the Born rows are their Kronecker
/// products, `row(w, A, B, F) = P_w ⊗ A ⊗ B ⊗ F`.
#[derive(Clone, Debug)]
pub struct BornMatrix {
    pub family: SettingFamily,
    pub layout: SystemLayout,
    past: Vec<Vec<f64>>,
    party: Vec<Vec<f64>>,
    future: Vec<Vec<f64>>,
    /// Kronecker index of every lexicographic position.
    kron_of_pos: Vec<usize>,
    /// Upper bound on rows materialized at once by [`BornMatrix::chunks`].
    pub max_chunk_rows: usize,
}

fn local_layout(labels: &[Label]) -> SystemLayout {
    SystemLayout::new(labels.iter().map(|&l| (l, 2)).collect()).expect("distinct labels")
}

impl BornMatrix {
    pub fn new(family: SettingFamily) -> Self {
        Self::from_fixtures(&Fixtures::new(family))
    }

    pub fn from_fixtures(fx: &Fixtures) -> Self {
        let pl = CoordMap::new(&local_layout(&[Label::Pt]));
        let al = CoordMap::new(&local_layout(&[Label::Ain, Label::Aout]));
        let fl = CoordMap::new(&local_layout(&[Label::Fc]));
        let past = fx.past.iter().map(|m| pl.to_coords(m)).collect();
        let party = fx.party.iter().map(|e| al.to_coords(&e.operator)).collect();
        let future: Vec<Vec<f64>> = fx
            .future
            .iter()
            .flatten()
            .map(|m| fl.to_coords(m))
            .collect();
        let family = fx.family;
        let nf = future.len();
        let kron_of_pos = (0..family.count())
            .map(|p| {
                let s = SettingIndex::from_position(p, family).expect("in range");
                let ia = Fixtures::party_index(s.ja, s.ka, s.a);
                let ib = Fixtures::party_index(s.jb, s.kb, s.b);
                let f = (s.z as usize - 1) * 2 + (s.c as usize - 1);
                (((s.w as usize - 1) * 24 + ia) * 24 + ib) * nf + f
            })
            .collect();
        Self {
            family,
            layout: SystemLayout::simplified_switch(),
            past,
            party,
            future,
            kron_of_pos,
            max_chunk_rows: 4096,
        }
    }

    pub fn rows(&self) -> usize {
        self.kron_of_pos.len()
    }

    pub fn cols(&self) -> usize {
        4096
    }

    fn split_kron(&self, k: usize) -> (usize, usize, usize, usize) {
        let nf = self.future.len();
        let f = k % nf;
        let r = k / nf;
        (r / (24 * 24), (r / 24) % 24, r % 24, f)
    }

    /// Nonzero entries of one row.
    pub fn row_sparse(&self, pos: usize) -> Vec<(usize, f64)> {
        let (w, a, b, f) = self.split_kron(self.kron_of_pos[pos]);
        let nz = |v: &Vec<f64>| {
            v.iter()
                .enumerate()
                .filter(|p| p.1.abs() > 1e-15)
                .map(|(i, &x)| (i, x))
                .collect::<Vec<_>>()
        };
        let (pw, pa, pb, pf) = (
            nz(&self.past[w]),
            nz(&self.party[a]),
            nz(&self.party[b]),
            nz(&self.future[f]),
        );
        let mut out = Vec::with_capacity(pw.len() * pa.len() * pb.len() * pf.len());
        for &(i, x) in &pw {
            for &(j, y) in &pa {
                for &(k, z) in &pb {
                    for &(l, u) in &pf {
                        out.push((((i * 16 + j) * 16 + k) * 4 + l, x * y * z * u));
                    }
                }
            }
        }
        out
    }

    pub fn row(&self, pos: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.cols()];
        for (i, x) in self.row_sparse(pos) {
            r[i] = x;
        }
        r
    }

    /// Sparse rows in chunks of at most `max_chunk_rows`.
    pub fn chunks(&self) -> impl Iterator<Item = Vec<Vec<(usize, f64)>>> + '_ {
        let step = self.max_chunk_rows.max(1);
        (0..self.rows()).step_by(step).map(move |s| {
            (s..(s + step).min(self.rows()))
                .map(|p| self.row_sparse(p))
                .collect()
        })
    }

    /// Probabilities `Tr(W·S)` for every setting, in lexicographic order.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.cols());
        let nf = self.future.len();
        let t = mode(w, &[4, 16, 16, 4], 0, &self.past, 4);
        let t = mode(&t, &[4, 16, 16, 4], 1, &self.party, 16);
        let t = mode(&t, &[4, 24, 16, 4], 2, &self.party, 16);
        let t = mode(&t, &[4, 24, 24, 4], 3, &self.future, 4);
        debug_assert_eq!(t.len(), 4 * 24 * 24 * nf);
        self.kron_of_pos.iter().map(|&k| t[k]).collect()
    }

    /// `Bᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows());
        let nf = self.future.len();
        let mut t = vec![0.0; 4 * 24 * 24 * nf];
        for (p, &k) in self.kron_of_pos.iter().enumerate() {
            t[k] = y[p];
        }
        let tr = |v: &Vec<Vec<f64>>, n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|i| v.iter().map(|r| r[i]).collect()).collect()
        };
        let t = mode(&t, &[4, 24, 24, nf], 3, &tr(&self.future, 4), nf);
        let t = mode(&t, &[4, 24, 24, 4], 2, &tr(&self.party, 16), 24);
        let t = mode(&t, &[4, 24, 16, 4], 1, &tr(&self.party, 16), 24);
        mode(&t, &[4, 16, 16, 4], 0, &tr(&self.past, 4), 4)
    }

    fn local_grams(&self) -> [Mat<f64>; 3] {
        let g = |v: &Vec<Vec<f64>>| {
            let n = v[0].len();
            Mat::<f64>::from_fn(n, n, |i, j| v.iter().map(|r| r[i] * r[j]).sum())
        };
        [g(&self.past), g(&self.party), g(&self.future)]
    }

    /// Span of the setting operators as a coordinate subspace.
    pub fn span(&self) -> Result<CoordSubspace> {
        let masks = self
            .local_grams()
            .iter()
            .map(|g| {
                let (_, proj) = pinv_and_projector(g)?;
                diagonal_mask(&proj)
            })
            .collect::<Result<Vec<_>>>()?;
        let map = CoordMap::new(&self.layout);
        let mask = (0..map.len())
            .map(|i| {
                let g = map.digits(i);
                masks[0][g[0]]
                    && masks[1][g[1] * 4 + g[2]]
                    && masks[1][g[3] * 4 + g[4]]
                    && masks[2][g[5]]
            })
            .collect();
        CoordSubspace::from_mask(self.layout.clone(), mask)
    }

    /// Minimum-norm `α` with `Σ_k α_k S_k = G`, i.e. `α = B (BᵀB)⁺ g`.
    pub fn expansion_coefficients(&self, g: &[f64]) -> Result<Vec<f64>> {
        let [gp, ga, gf] = self.local_grams();
        let to_rows = |m: &Mat<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        let (pp, _) = pinv_and_projector(&gp)?;
        let (pa, _) = pinv_and_projector(&ga)?;
        let (pf, _) = pinv_and_projector(&gf)?;
        let t = mode(g, &[4, 16, 16, 4], 0, &to_rows(&pp), 4);
        let t = mode(&t, &[4, 16, 16, 4], 1, &to_rows(&pa), 16);
        let t = mode(&t, &[4, 16, 16, 4], 2, &to_rows(&pa), 16);
        let t = mode(&t, &[4, 16, 16, 4], 3, &to_rows(&pf), 4);
        Ok(self.apply(&t))
    }
}

/// Mode product along axis `k`: `out[.., i, ..] = Σ_j m[i][j] t[.., j, ..]`.
fn mode(t: &[f64], sizes: &[usize], k: usize, m: &[Vec<f64>], inner_in: usize) -> Vec<f64> {
    debug_assert_eq!(sizes[k], inner_in);
    let inner: usize = sizes[k + 1..].iter().product();
    let outer: usize = sizes[..k].iter().product();
    let q_out = m.len();
    let mut out = vec![0.0; outer * q_out * inner];
    for o in 0..outer {
        for (a, row) in m.iter().enumerate() {
            let dst = (o * q_out + a) * inner;
            for (b, &x) in row.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let src = (o * inner_in + b) * inner;
                for i in 0..inner {
                    out[dst + i] += x * t[src + i];
                }
            }
        }
    }
    out
}

const PINV_CUTOFF: f64 = 1e-9;

fn pinv_and_projector(g: &Mat<f64>) -> Result<(Mat<f64>, Mat<f64>)> {
    let n = g.nrows();
    let e = g
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("{e:?}")))?;
    let s = e.S().column_vector();
    let u = e.U();
    let top = (0..n).map(|i| s[i]).fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&i| s[i] > PINV_CUTOFF * top).collect();
    let pinv = Mat::<f64>::from_fn(n, n, |i, j| {
        keep.iter().map(|&k| u[(i, k)] * u[(j, k)] / s[k]).sum()
    });
    let proj = Mat::<f64>::from_fn(n, n, |i, j| {
        keep.iter().map(|&k| u[(i, k)] * u[(j, k)]).sum()
    });
    Ok((pinv, proj))
}

fn diagonal_mask(p: &Mat<f64>) -> Result<Vec<bool>> {
    let n = p.nrows();
    let mut mask = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { p[(i, i)].round() } else { 0.0 };
            if (p[(i, j)] - target).abs() > 1e-8 {
                return Err(Error::UnsupportedLayout(
                    "setting span is not aligned with the product basis".into(),
                ));
            }
        }
        mask[i] = p[(i, i)] > 0.5;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procmat::{switch_simplified, white_noise_process, CONTROL_Y_MINUS};

    #[test]
    fn family_counts() {
        assert_eq!(SettingFamily::Full.count(), 13824);
        assert_eq!(SettingFamily::Restricted.count(), 9216);
        assert_eq!(SettingFamily::Restricted.configurations(), 4608);
        assert_eq!(instrument_set().len(), 24);
    }

    #[test]
    fn positions_round_trip() {
        for fam in [SettingFamily::Full, SettingFamily::Restricted] {
            for p in [0, 1, 7, 8, 1000, fam.count() - 1] {
                let s = SettingIndex::from_position(p, fam).unwrap();
                assert_eq!(s.position(fam).unwrap(), p);
            }
            assert!(SettingIndex::from_position(fam.count(), fam).is_err());
        }
        let s = SettingIndex {
            w: 1,
            ja: 1,
            ka: 1,
            jb: 1,
            kb: 1,
            z: 3,
            a: 1,
            b: 1,
            c: 1,
        };
        assert!(s.position(SettingFamily::Restricted).is_err());
    }

    #[test]
    fn fixtures_by_hand() {
        let r = &instrument_set()[0];
        assert_eq!((r.i, r.j, r.k), (1, 1, 1));
        let p0 = projector("0").unwrap();
        assert!(r.operator.sub(&kron(&p0, &p0)).max_abs() < 1e-15);
        let m = measurement_set();
        assert!(m[2][0].sub(&projector("y+").unwrap()).max_abs() < 1e-15);
        let e = experimental_sets();
        assert!(e.control[1][0].sub(&projector("y-").unwrap()).max_abs() < 1e-15);
        assert!(e.states[2].sub(&projector("-").unwrap()).max_abs() < 1e-15);
        assert!(e.effects[2][0].sub(&projector("y-").unwrap()).max_abs() < 1e-15);
    }

    #[test]
    fn born_rows_match_direct_traces() {
        let w = switch_simplified(CONTROL_Y_MINUS).unwrap();
        let co = w.coords();
        for fam in [SettingFamily::Full, SettingFamily::Restricted] {
            let bm = BornMatrix::new(fam);
            let all = bm.apply(&co);
            for p in (0..fam.count()).step_by(997) {
                let s = SettingIndex::from_position(p, fam).unwrap();
                let direct = born_probability(&w, &s, fam).unwrap();
                let row: f64 = bm.row_sparse(p).iter().map(|&(i, x)| x * co[i]).sum();
                assert!((direct - row).abs() < 1e-10 && (direct - all[p]).abs() < 1e-10);
            }
            for g in all.chunks(8) {
                assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn white_noise_gives_uniform_outcomes() {
        let w = white_noise_process(&SystemLayout::simplified_switch()).unwrap();
        let p = BornMatrix::new(SettingFamily::Full).apply(&w.coords());
        assert!(p.iter().all(|&x| (x - 0.125).abs() < 1e-12));
    }

    #[test]
    fn transpose_is_adjoint() {
        let bm = BornMatrix::new(SettingFamily::Restricted);
        let x: Vec<f64> = (0..4096)
            .map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0)
            .collect();
        let y: Vec<f64> = (0..bm.rows())
            .map(|i| ((i * 13 % 29) as f64) / 14.0 - 1.0)
            .collect();
        let lhs: f64 = bm.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = bm
            .apply_transpose(&y)
            .iter()
            .zip(&x)
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0));
    }

    #[test]
    fn spans() {
        let full = BornMatrix::new(SettingFamily::Full).span().unwrap();
        assert_eq!(full.dim(), 4096);
        let res = BornMatrix::new(SettingFamily::Restricted).span().unwrap();
        assert_eq!(res.dim(), 3072);
        let map = CoordMap::new(&SystemLayout::simplified_switch());
        for i in 0..4096 {
            assert_eq!(res.contains_index(i), map.digits(i)[5] != 1);
        }
    }

    #[test]
    fn expansion_reconstructs_operator() {
        for fam in [SettingFamily::Full, SettingFamily::Restricted] {
            let bm = BornMatrix::new(fam);
            let span = bm.span().unwrap();
            let g: Vec<f64> = span.project(
                &(0..4096)
                    .map(|i| ((i * 7 % 13) as f64) - 6.0)
                    .collect::<Vec<_>>(),
            );
            let alpha = bm.expansion_coefficients(&g).unwrap();
            let back = bm.apply_transpose(&alpha);
            let err = back
                .iter()
                .zip(&g)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "{fam}: {err}");
        }
    }
}
