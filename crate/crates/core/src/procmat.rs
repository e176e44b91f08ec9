//! Process matrices: causally ordered combs, the quantum switch, white noise,
//! and the linear span of valid processes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::choi::{choi_of_unitary, replacement_channel};
use crate::error::{Error, Result};
use crate::qsys::{
    c, eigvalsh, partial_trace, trace_replace, ComplexMatrix, CoordMap, Label, SystemLayout, C64,
};

pub const PSD_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;
pub const VALIDITY_TOL: f64 = 1e-8;
const RANK_CUTOFF: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CausalOrder {
    AThenB,
    BThenA,
}

impl CausalOrder {
    pub const BOTH: [CausalOrder; 2] = [CausalOrder::AThenB, CausalOrder::BThenA];

    /// (first party's input, first output, second input, second output).
    fn parties(self) -> [Label; 4] {
        match self {
            CausalOrder::AThenB => [Label::Ain, Label::Aout, Label::Bin, Label::Bout],
            CausalOrder::BThenA => [Label::Bin, Label::Bout, Label::Ain, Label::Aout],
        }
    }
}

/// `d_P · d_{A_out} · d_{B_out}`.
pub fn expected_trace(layout: &SystemLayout) -> f64 {
    layout.dim_where(|l| l.is_past() || l == Label::Aout || l == Label::Bout) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    pub matrix: ComplexMatrix,
    pub layout: SystemLayout,
    pub trace_norm: f64,
}

impl ProcessMatrix {
    /// Checks PSD, trace normalization and membership in the valid span.
    pub fn new(matrix: ComplexMatrix, layout: SystemLayout) -> Result<Self> {
        let p = Self::new_unchecked(matrix, layout)?;
        p.validate()?;
        Ok(p)
    }

    /// Builds the value without the PSD/validity checks (dimensions are still checked).
    pub fn new_unchecked(matrix: ComplexMatrix, layout: SystemLayout) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                found: matrix.rows(),
            });
        }
        let trace_norm = expected_trace(&layout);
        Ok(Self {
            matrix: matrix.hermitian_part(),
            layout,
            trace_norm,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let dev = self.matrix.hermitian_deviation();
        if dev > crate::qsys::HERMITIAN_TOL * self.matrix.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let ev = eigvalsh(&self.matrix)?;
        if ev[0] < -PSD_TOL * self.trace_norm {
            return Err(Error::NotPsd { min_eig: ev[0] });
        }
        let tr = self.matrix.trace().re;
        if (tr - self.trace_norm).abs() > TRACE_TOL * self.trace_norm {
            return Err(Error::Invalid(format!(
                "trace {tr} differs from {}",
                self.trace_norm
            )));
        }
        let v = validity_projector(&self.layout)?;
        let dist = v.subspace.distance(&self.coords());
        if dist > VALIDITY_TOL * self.trace_norm {
            return Err(Error::Invalid(format!(
                "outside the valid span by {dist:e}"
            )));
        }
        Ok(())
    }

    pub fn coords(&self) -> Vec<f64> {
        CoordMap::new(&self.layout).to_coords(&self.matrix)
    }

    pub fn from_coords(coords: &[f64], layout: &SystemLayout) -> Result<Self> {
        Self::new(CoordMap::new(layout).from_coords(coords), layout.clone())
    }

    /// `Σ λ_i W_i` over one layout (weights are not renormalized).
    pub fn mixture(parts: &[(f64, &ProcessMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or(Error::Invalid("empty mixture".into()))?
            .1;
        let mut acc = ComplexMatrix::zeros(first.matrix.rows(), first.matrix.cols());
        for (w, p) in parts {
            if p.layout != first.layout {
                return Err(Error::UnsupportedLayout(format!(
                    "{} vs {}",
                    p.layout, first.layout
                )));
            }
            acc = acc.add_scaled(&p.matrix, *w);
        }
        Self::new(acc, first.layout.clone())
    }
}

/// Subspace of Hermitian operators spanned by a subset of the product-basis
/// elements of a [`CoordMap`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoordSubspace {
    pub layout: SystemLayout,
    mask: Vec<bool>,
}

impl CoordSubspace {
    pub fn from_mask(layout: SystemLayout, mask: Vec<bool>) -> Result<Self> {
        let n = layout.dim() * layout.dim();
        if mask.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mask.len(),
            });
        }
        Ok(Self { layout, mask })
    }

    pub fn full(layout: &SystemLayout) -> Self {
        let n = layout.dim() * layout.dim();
        Self {
            layout: layout.clone(),
            mask: vec![true; n],
        }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn dim(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn complement_indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| !self.mask[i]).collect()
    }

    pub fn project(&self, coords: &[f64]) -> Vec<f64> {
        coords
            .iter()
            .zip(&self.mask)
            .map(|(&x, &m)| if m { x } else { 0.0 })
            .collect()
    }

    pub fn project_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let map = CoordMap::new(&self.layout);
        map.from_coords(&self.project(&map.to_coords(m)))
    }

    /// Euclidean norm of the component orthogonal to the subspace.
    pub fn distance(&self, coords: &[f64]) -> f64 {
        coords
            .iter()
            .zip(&self.mask)
            .filter(|p| !p.1)
            .map(|p| p.0 * p.0)
            .sum::<f64>()
            .sqrt()
    }

    pub fn intersect(&self, other: &Self) -> Self {
        assert_eq!(self.layout, other.layout);
        Self {
            layout: self.layout.clone(),
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }
}

/// Span of valid process matrices: an affine offset (the white-noise process)
/// plus traceless valid directions, each a product-basis element.
#[derive(Clone, Debug, PartialEq)]
pub struct ValiditySubspace {
    pub subspace: CoordSubspace,
    pub offset: Vec<f64>,
}

impl ValiditySubspace {
    pub fn layout(&self) -> &SystemLayout {
        &self.subspace.layout
    }

    /// Dimension of the linear span (traceless directions plus the identity).
    pub fn dim(&self) -> usize {
        self.subspace.dim()
    }

    /// Coordinate indices of the orthonormal traceless valid directions.
    pub fn traceless_basis(&self) -> Vec<usize> {
        self.subspace
            .indices()
            .into_iter()
            .filter(|&i| i != 0)
            .collect()
    }

    pub fn project(&self, coords: &[f64]) -> Vec<f64> {
        self.subspace.project(coords)
    }

    pub fn project_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        self.subspace.project_matrix(m)
    }
}

fn qubit_gates() -> Vec<ComplexMatrix> {
    let h = 1.0 / 2.0f64.sqrt();
    let o = c(1.0, 0.0);
    let z = c(0.0, 0.0);
    let mk = |d: [C64; 4]| ComplexMatrix::new(2, 2, d.to_vec()).expect("2x2");
    let base = [
        ComplexMatrix::identity(2),
        mk([z, o, o, z]),
        mk([z, c(0.0, -1.0), c(0.0, 1.0), z]),
        mk([o, z, z, -o]),
        mk([c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]),
        mk([o, z, z, c(0.0, 1.0)]),
    ];
    let mut out = Vec::new();
    for a in &base {
        for b in &base {
            out.push(a.matmul(b));
        }
    }
    out
}

pub(crate) fn spanning_states() -> Vec<ComplexMatrix> {
    let h = 1.0 / 2.0f64.sqrt();
    [
        [c(1.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(1.0, 0.0)],
        [c(h, 0.0), c(h, 0.0)],
        [c(h, 0.0), c(0.0, h)],
    ]
    .iter()
    .map(|v| ComplexMatrix::outer(v))
    .collect()
}

/// Returns the coordinate mask spanned by `ops` (all on `layout`), or an error
/// if that span is not aligned with the product basis.
pub(crate) fn spanned_mask(ops: &[ComplexMatrix], layout: &SystemLayout) -> Result<Vec<bool>> {
    let map = CoordMap::new(layout);
    let n = map.len();
    let vecs: Vec<Vec<f64>> = ops.iter().map(|o| map.to_coords(o)).collect();
    let gram = faer::Mat::<f64>::from_fn(n, n, |i, j| vecs.iter().map(|v| v[i] * v[j]).sum());
    let eig = gram
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("local span: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let top = (0..n).map(|i| s[i]).fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..n)
        .filter(|&i| s[i] > RANK_CUTOFF * top.max(1.0))
        .collect();
    let mut mask = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            let p: f64 = keep.iter().map(|&k| u[(i, k)] * u[(j, k)]).sum();
            let expect = if i == j { p.round() } else { 0.0 };
            if (p - expect).abs() > 1e-8 {
                return Err(Error::UnsupportedLayout(
                    "span is not aligned with the product basis".into(),
                ));
            }
            if i == j && expect == 1.0 {
                mask[i] = true;
            }
        }
    }
    Ok(mask)
}

fn party_layout(input: Label, output: Label) -> SystemLayout {
    SystemLayout::new(vec![(input, 2), (output, 2)]).expect("two distinct labels")
}

fn require_roles(layout: &SystemLayout) -> Result<()> {
    if !layout.is_qubit() {
        return Err(Error::UnsupportedLayout(format!(
            "{layout} is not all-qubit"
        )));
    }
    for l in [Label::Ain, Label::Aout, Label::Bin, Label::Bout] {
        if !layout.contains(l) {
            return Err(Error::UnsupportedLayout(format!("{layout} lacks {l}")));
        }
    }
    Ok(())
}

/// Linear span of valid processes on `layout`.
///
/// Every deterministic setting `ρ ⊗ A ⊗ B ⊗ 1_F` (ρ a state, A and B CPTP)
/// must give probability one. Such settings span a product of local spans; the
/// span of valid processes is the orthogonal complement of the traceless part
/// of that product.
pub fn validity_projector(layout: &SystemLayout) -> Result<ValiditySubspace> {
    require_roles(layout)?;
    let past_mask = spanned_mask(
        &spanning_states()
            .iter()
            .map(|s| s.transpose())
            .collect::<Vec<_>>(),
        &party_layout(Label::Pt, Label::Pc).retain(&[Label::Pt])?,
    )?;
    let mut chois = Vec::new();
    for u in qubit_gates() {
        chois.push(choi_of_unitary(&u)?.matrix.transpose());
    }
    for s in spanning_states() {
        chois.push(replacement_channel(2, &s)?.matrix.transpose());
    }
    let party_mask = spanned_mask(&chois, &party_layout(Label::Ain, Label::Aout))?;
    let future_mask = spanned_mask(
        &[ComplexMatrix::identity(2)],
        &party_layout(Label::Ft, Label::Fc).retain(&[Label::Fc])?,
    )?;

    let map = CoordMap::new(layout);
    let labels = layout.labels();
    let pos = |l: Label| labels.iter().position(|&m| m == l).expect("role present");
    let (ai, ao, bi, bo) = (
        pos(Label::Ain),
        pos(Label::Aout),
        pos(Label::Bin),
        pos(Label::Bout),
    );
    let mut mask = vec![true; map.len()];
    for (idx, m) in mask.iter_mut().enumerate().skip(1) {
        let g = map.digits(idx);
        let in_setting_span = party_mask[g[ai] * 4 + g[ao]]
            && party_mask[g[bi] * 4 + g[bo]]
            && labels.iter().enumerate().all(|(k, l)| {
                if l.is_past() {
                    past_mask[g[k]]
                } else if l.is_future() {
                    future_mask[g[k]]
                } else {
                    true
                }
            });
        *m = !in_setting_span;
    }
    let subspace = CoordSubspace::from_mask(layout.clone(), mask)?;
    let offset = white_noise_process(layout)?.coords();
    Ok(ValiditySubspace { subspace, offset })
}

/// Trace-replacement conditions of a comb with the given order, as
/// `(replaced, extra)` label pairs: `_{X}W = _{X ∪ Y}W`.
pub fn comb_conditions(order: CausalOrder, layout: &SystemLayout) -> Vec<(Vec<Label>, Vec<Label>)> {
    let [i1, o1, i2, o2] = order.parties();
    let fut: Vec<Label> = layout
        .labels()
        .into_iter()
        .filter(|l| l.is_future())
        .collect();
    let past: Vec<Label> = layout
        .labels()
        .into_iter()
        .filter(|l| l.is_past())
        .collect();
    let mut x = fut.clone();
    let c1 = (x.clone(), vec![o2]);
    x.extend([i2, o2]);
    let c2 = (x.clone(), vec![o1]);
    x.extend([i1, o1]);
    let c3 = (x, past);
    vec![c1, c2, c3]
}

/// Linear span of combs with the given order: the joint null space of the
/// trace-replacement conditions. Each condition acts diagonally on the product
/// basis (it keeps a basis element iff it is the identity on `X` and not the
/// identity on `Y`), so the null space is a coordinate subspace.
pub fn comb_subspace(order: CausalOrder, layout: &SystemLayout) -> Result<CoordSubspace> {
    require_roles(layout)?;
    let map = CoordMap::new(layout);
    let conds: Vec<(Vec<usize>, Vec<usize>)> = comb_conditions(order, layout)
        .into_iter()
        .map(|(x, y)| {
            let px = x
                .iter()
                .map(|&l| layout.position(l))
                .collect::<Result<Vec<_>>>()?;
            let py = y
                .iter()
                .map(|&l| layout.position(l))
                .collect::<Result<Vec<_>>>()?;
            Ok((px, py))
        })
        .collect::<Result<_>>()?;
    let mask = (0..map.len())
        .map(|idx| {
            let g = map.digits(idx);
            conds.iter().all(|(x, y)| {
                let kept = x.iter().all(|&k| g[k] == 0) && !y.iter().all(|&k| g[k] == 0);
                !kept
            })
        })
        .collect();
    CoordSubspace::from_mask(layout.clone(), mask)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombReport {
    pub order: CausalOrder,
    /// Frobenius norm of `_{X}W − _{X∪Y}W` per condition.
    pub residuals: Vec<f64>,
    pub passed: bool,
}

pub fn comb_membership(w: &ProcessMatrix, order: CausalOrder, tol: f64) -> Result<CombReport> {
    require_roles(&w.layout)?;
    let mut residuals = Vec::new();
    for (x, y) in comb_conditions(order, &w.layout) {
        let lhs = trace_replace(&w.matrix, &w.layout, &x)?;
        let mut xy = x.clone();
        xy.extend(y);
        let rhs = trace_replace(&w.matrix, &w.layout, &xy)?;
        residuals.push(lhs.sub(&rhs).frobenius_norm());
    }
    let passed = residuals.iter().all(|&r| r <= tol);
    Ok(CombReport {
        order,
        residuals,
        passed,
    })
}

fn index_of(layout: &SystemLayout, digits: &[(Label, usize)]) -> usize {
    let strides = layout.strides();
    digits
        .iter()
        .map(|&(l, d)| d * strides[layout.position(l).expect("label present")])
        .sum()
}

/// `|A→B⟩` or `|B→A⟩`: identity channels chained from the past through the
/// two parties to `future`.
fn comb_vector(order: CausalOrder, layout: &SystemLayout, past: Label, future: Label) -> Vec<C64> {
    let [i1, o1, i2, o2] = order.parties();
    let mut v = vec![c(0.0, 0.0); layout.dim()];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let idx = index_of(
                    layout,
                    &[(past, i), (i1, i), (o1, j), (i2, j), (o2, k), (future, k)],
                );
                v[idx] = c(1.0, 0.0);
            }
        }
    }
    v
}

fn single_role(layout: &SystemLayout, pred: impl Fn(Label) -> bool, what: &str) -> Result<Label> {
    let ls: Vec<Label> = layout.labels().into_iter().filter(|&l| pred(l)).collect();
    match ls.as_slice() {
        [l] => Ok(*l),
        _ => Err(Error::UnsupportedLayout(format!(
            "{layout} needs exactly one {what} factor"
        ))),
    }
}

/// Rank-one comb built from identity Choi vectors.
pub fn comb_process(order: CausalOrder, layout: &SystemLayout) -> Result<ProcessMatrix> {
    require_roles(layout)?;
    if layout.len() != 6 {
        return Err(Error::UnsupportedLayout(format!(
            "{layout} must have one past and one future factor"
        )));
    }
    let past = single_role(layout, Label::is_past, "past")?;
    let future = single_role(layout, Label::is_future, "future")?;
    let v = comb_vector(order, layout, past, future);
    ProcessMatrix::new(ComplexMatrix::outer(&v), layout.clone())
}

pub const CONTROL_PLUS: [C64; 2] = [
    c(core::f64::consts::FRAC_1_SQRT_2, 0.0),
    c(core::f64::consts::FRAC_1_SQRT_2, 0.0),
];
/// `(|0⟩ − i|1⟩)/√2`.
pub const CONTROL_Y_MINUS: [C64; 2] = [
    c(core::f64::consts::FRAC_1_SQRT_2, 0.0),
    c(0.0, -core::f64::consts::FRAC_1_SQRT_2),
];
pub const CONTROL_ZERO: [C64; 2] = [c(1.0, 0.0), c(0.0, 0.0)];

/// Switch with the control prepared in `control`, target future traced out.
pub fn switch_simplified(control: [C64; 2]) -> Result<ProcessMatrix> {
    let norm = control[0].norm_sqr() + control[1].norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized { norm: norm.sqrt() });
    }
    use Label::*;
    let big = SystemLayout::new(
        [Pt, Ain, Aout, Bin, Bout, Ft, Fc]
            .into_iter()
            .map(|l| (l, 2))
            .collect(),
    )?;
    let ab = comb_vector(CausalOrder::AThenB, &big, Pt, Ft);
    let ba = comb_vector(CausalOrder::BThenA, &big, Pt, Ft);
    let fc = big.strides()[big.position(Fc)?];
    let mut v = vec![c(0.0, 0.0); big.dim()];
    for i in 0..big.dim() {
        if (i / fc) % 2 == 0 {
            v[i] = control[0] * ab[i - (i / fc % 2) * fc];
        } else {
            v[i] = control[1] * ba[i - fc];
        }
    }
    let w = partial_trace(
        &ComplexMatrix::outer(&v),
        &big,
        &[Pt, Ain, Aout, Bin, Bout, Fc],
    )?;
    ProcessMatrix::new(w, SystemLayout::simplified_switch())
}

/// Rank-one switch process over `(P_c, P_t, A_in, A_out, B_in, B_out, F_t, F_c)`.
pub fn switch_full() -> Result<ProcessMatrix> {
    use Label::*;
    let layout = SystemLayout::full_switch();
    let inner = SystemLayout::new(
        [Pt, Ain, Aout, Bin, Bout, Ft]
            .into_iter()
            .map(|l| (l, 2))
            .collect(),
    )?;
    let ab = comb_vector(CausalOrder::AThenB, &inner, Pt, Ft);
    let ba = comb_vector(CausalOrder::BThenA, &inner, Pt, Ft);
    let zero = [c(1.0, 0.0), c(0.0, 0.0)];
    let one = [c(0.0, 0.0), c(1.0, 0.0)];
    let v0 = crate::qsys::kron_vec(&crate::qsys::kron_vec(&zero, &ab), &zero);
    let v1 = crate::qsys::kron_vec(&crate::qsys::kron_vec(&one, &ba), &one);
    let v: Vec<C64> = v0.iter().zip(&v1).map(|(a, b)| a + b).collect();
    ProcessMatrix::new(ComplexMatrix::outer(&v), layout)
}

/// `1_W = 1/(d_P d_{A_out} d_{B_out})`.
pub fn white_noise_process(layout: &SystemLayout) -> Result<ProcessMatrix> {
    let m = ComplexMatrix::identity(layout.dim()).scale(1.0 / expected_trace(layout));
    ProcessMatrix::new_unchecked(m, layout.clone())
}

/// Named presets on the simplified layout.
pub fn preset(name: &str) -> Result<ProcessMatrix> {
    let l = SystemLayout::simplified_switch();
    match name {
        "switch-y-" => switch_simplified(CONTROL_Y_MINUS),
        "switch-plus" => switch_simplified(CONTROL_PLUS),
        "comb-ab" => comb_process(CausalOrder::AThenB, &l),
        "comb-ba" => comb_process(CausalOrder::BThenA, &l),
        "white-noise" => white_noise_process(&l),
        "separable-mix" => {
            let ab = comb_process(CausalOrder::AThenB, &l)?;
            let ba = comb_process(CausalOrder::BThenA, &l)?;
            ProcessMatrix::mixture(&[(0.5, &ab), (0.5, &ba)])
        }
        other => Err(Error::Invalid(format!("unknown preset `{other}`"))),
    }
}

pub const PRESETS: [&str; 6] = [
    "switch-y-",
    "switch-plus",
    "comb-ab",
    "comb-ba",
    "white-noise",
    "separable-mix",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsys::{contract_state, herm_eig, kron};

    fn simp() -> SystemLayout {
        SystemLayout::simplified_switch()
    }

    #[test]
    fn subspace_dimensions() {
        let v = validity_projector(&simp()).unwrap();
        assert_eq!(v.dim(), 3421);
        let ab = comb_subspace(CausalOrder::AThenB, &simp()).unwrap();
        let ba = comb_subspace(CausalOrder::BThenA, &simp()).unwrap();
        assert_eq!((ab.dim(), ba.dim()), (3277, 3277));
        assert!(ab.is_subset_of(&v.subspace) && ba.is_subset_of(&v.subspace));
    }

    #[test]
    fn comb_traces_and_membership() {
        let ab = comb_process(CausalOrder::AThenB, &simp()).unwrap();
        let ba = comb_process(CausalOrder::BThenA, &simp()).unwrap();
        assert!((ab.matrix.trace().re - 8.0).abs() < 1e-12);
        assert!(
            comb_membership(&ab, CausalOrder::AThenB, 1e-10)
                .unwrap()
                .passed
        );
        assert!(
            !comb_membership(&ab, CausalOrder::BThenA, 1e-10)
                .unwrap()
                .passed
        );
        assert!(
            comb_membership(&ba, CausalOrder::BThenA, 1e-10)
                .unwrap()
                .passed
        );
        let ys = switch_simplified(CONTROL_Y_MINUS).unwrap();
        for o in CausalOrder::BOTH {
            let r = comb_membership(&ys, o, 1e-10).unwrap();
            assert!(!r.passed);
            assert!(
                r.residuals.iter().cloned().fold(0.0, f64::max) > 0.1,
                "{r:?}"
            );
        }
    }

    #[test]
    fn switch_is_rank_two_and_valid() {
        let ys = switch_simplified(CONTROL_Y_MINUS).unwrap();
        assert_eq!(ys.matrix.rows(), 64);
        let ev = herm_eig(&ys.matrix).unwrap().values;
        assert_eq!(ev.iter().filter(|&&x| x.abs() > 1e-9).count(), 2);
        assert!(switch_simplified([c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn control_zero_reduces_to_comb() {
        let w0 = switch_simplified(CONTROL_ZERO).unwrap();
        let ab = comb_process(CausalOrder::AThenB, &simp()).unwrap();
        let reduced = partial_trace(
            &ab.matrix,
            &ab.layout,
            &[Label::Pt, Label::Ain, Label::Aout, Label::Bin, Label::Bout],
        )
        .unwrap();
        let expect = kron(&reduced, &ComplexMatrix::diag(&[1.0, 0.0]));
        assert!(w0.matrix.sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn full_switch_contracts_to_simplified() {
        let full = switch_full().unwrap();
        assert!((full.matrix.trace().re - 16.0).abs() < 1e-12);
        let plus = ComplexMatrix::outer(&CONTROL_PLUS);
        let (w, l) = contract_state(&full.matrix, &full.layout, Label::Pc, &plus).unwrap();
        let keep: Vec<Label> = l.labels().into_iter().filter(|&x| x != Label::Ft).collect();
        let w = partial_trace(&w, &l, &keep).unwrap();
        let sp = switch_simplified(CONTROL_PLUS).unwrap();
        assert!(w.sub(&sp.matrix).max_abs() < 1e-12);
        let ev = herm_eig(&full.matrix).unwrap().values;
        assert_eq!(ev.iter().filter(|&&x| x.abs() > 1e-9).count(), 1);
    }

    #[test]
    fn projector_fixes_valid_processes() {
        let v = validity_projector(&simp()).unwrap();
        for name in PRESETS {
            let w = preset(name).unwrap();
            let co = w.coords();
            let p = v.project(&co);
            let dev = co
                .iter()
                .zip(&p)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12, "{name}");
        }
        assert!((v.offset[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_on_local_marginals() {
        let v = validity_projector(&simp()).unwrap();
        let l = simp();
        let eye = |n| ComplexMatrix::identity(n);
        let p0 = ComplexMatrix::diag(&[1.0, 0.0]);
        // |0⟩⟨0| on A_in with identity elsewhere lies in the span already
        let x = kron(&kron(&eye(2), &p0), &eye(16));
        let px = v.project_matrix(&x);
        assert!(px.sub(&x).max_abs() < 1e-12);
        assert!(v.project_matrix(&x.sub(&px)).max_abs() < 1e-12);
        // on A_out the Z part is removed
        let y = kron(&kron(&eye(4), &p0), &eye(8));
        let py = v.project_matrix(&y);
        assert!(py.sub(&eye(64).scale(0.5)).max_abs() < 1e-12);
        let twice = v.project_matrix(&py);
        assert!(twice.sub(&py).max_abs() < 1e-12);
        assert_eq!(l.dim(), 64);
    }

    #[test]
    fn white_noise_entries() {
        let w = white_noise_process(&simp()).unwrap();
        w.validate().unwrap();
        assert!((w.matrix[(3, 3)].re - 0.125).abs() < 1e-15 && w.matrix[(3, 4)].norm() == 0.0);
        assert!((w.matrix.trace().re - 8.0).abs() < 1e-12);
    }
}
