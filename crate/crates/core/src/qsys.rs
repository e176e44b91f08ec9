//! Dense complex matrices over labeled tensor-product spaces.
//!
//! Index convention: the leftmost factor of a [`SystemLayout`] is the most
//! significant digit of a composite basis index.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
    hermitian: bool,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix({}x{}", self.rows, self.cols)?;
        if self.rows * self.cols <= 16 {
            write!(f, ", {:?}", self.data)?;
        }
        write!(f, ")")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            data,
            hermitian: false,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
            hermitian: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(1.0, 0.0);
        }
        m.hermitian = true;
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            data,
            hermitian: false,
        }
    }

    pub fn from_real(rows: usize, cols: usize, re: &[f64]) -> Result<Self> {
        Self::new(rows, cols, re.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        m.hermitian = true;
        m
    }

    /// Projector `|v⟩⟨v|` (not normalized).
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        let mut m = Self::from_fn(n, n, |i, j| v[i] * v[j].conj());
        m.hermitian = true;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    /// Whether the Hermitian flag is set.
    pub fn hermitian_flag(&self) -> bool {
        self.hermitian
    }

    /// Sets the Hermitian flag after verifying `max |M − M†| ≤ 1e-12`.
    pub fn mark_hermitian(mut self) -> Result<Self> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        self.hermitian = true;
        Ok(self)
    }

    /// Replaces the matrix by `(M + M†)/2` and sets the Hermitian flag.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square(), "hermitian_part needs a square matrix");
        let n = self.rows;
        let mut m = Self::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5);
        m.hermitian = true;
        m
    }

    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj());
        m.hermitian = self.hermitian;
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)]);
        m.hermitian = self.hermitian;
        m
    }

    pub fn conj(&self) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|z| *z = z.conj());
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|z| *z *= s);
        m
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|z| *z *= s);
        m.hermitian = self.hermitian && s.im == 0.0;
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        self.zip(other, |a, b| a + b * s)
    }

    fn zip(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch"
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
            hermitian: self.hermitian && other.hermitian,
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let p = self.as_faer() * other.as_faer();
        Self::from_faer(p.as_ref())
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "vector length mismatch");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `Tr(A†B)`.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `Tr(A·B)`, real part, for Hermitian pairs.
    pub fn trace_product_re(&self, other: &Self) -> f64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = 0.0;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += (self[(i, k)] * other[(k, i)]).re;
            }
        }
        acc
    }

    pub(crate) fn as_faer(&self) -> MatRef<'_, C64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }

    pub(crate) fn from_faer(m: MatRef<'_, C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        self.hermitian = false;
        &mut self.data[i * self.cols + j]
    }
}

/// Named tensor factors of the switch scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Pc,
    Pt,
    Ain,
    Aout,
    Bin,
    Bout,
    Fc,
    Ft,
}

impl Label {
    pub const ALL: [Label; 8] = [
        Label::Pc,
        Label::Pt,
        Label::Ain,
        Label::Aout,
        Label::Bin,
        Label::Bout,
        Label::Fc,
        Label::Ft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Label::Pc => "P_c",
            Label::Pt => "P_t",
            Label::Ain => "A_in",
            Label::Aout => "A_out",
            Label::Bin => "B_in",
            Label::Bout => "B_out",
            Label::Fc => "F_c",
            Label::Ft => "F_t",
        }
    }

    pub fn parse(s: &str) -> Result<Label> {
        Label::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }

    pub fn is_past(self) -> bool {
        matches!(self, Label::Pc | Label::Pt)
    }

    pub fn is_future(self) -> bool {
        matches!(self, Label::Fc | Label::Ft)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemLayout {
    factors: Vec<(Label, usize)>,
}

impl SystemLayout {
    pub fn new(factors: Vec<(Label, usize)>) -> Result<Self> {
        for (i, (l, d)) in factors.iter().enumerate() {
            if factors[..i].iter().any(|(m, _)| m == l) {
                return Err(Error::DuplicateLabel(l.name().to_string()));
            }
            if *d == 0 {
                return Err(Error::Invalid(format!("factor {l} has dimension 0")));
            }
        }
        Ok(Self { factors })
    }

    /// `(P_t, A_in, A_out, B_in, B_out, F_c)`, all qubits.
    pub fn simplified_switch() -> Self {
        use Label::*;
        Self {
            factors: [Pt, Ain, Aout, Bin, Bout, Fc]
                .into_iter()
                .map(|l| (l, 2))
                .collect(),
        }
    }

    /// `(P_c, P_t, A_in, A_out, B_in, B_out, F_t, F_c)`, all qubits.
    pub fn full_switch() -> Self {
        use Label::*;
        Self {
            factors: [Pc, Pt, Ain, Aout, Bin, Bout, Ft, Fc]
                .into_iter()
                .map(|l| (l, 2))
                .collect(),
        }
    }

    pub fn factors(&self) -> &[(Label, usize)] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.1).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.factors.iter().map(|f| f.0).collect()
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.1).product()
    }

    pub fn position(&self, label: Label) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.0 == label)
            .ok_or_else(|| Error::UnknownLabel(label.name().to_string()))
    }

    pub fn contains(&self, label: Label) -> bool {
        self.factors.iter().any(|f| f.0 == label)
    }

    pub fn dim_of(&self, label: Label) -> Result<usize> {
        Ok(self.factors[self.position(label)?].1)
    }

    /// Product of the dimensions of the listed labels that are present.
    pub fn dim_where(&self, pred: impl Fn(Label) -> bool) -> usize {
        self.factors
            .iter()
            .filter(|f| pred(f.0))
            .map(|f| f.1)
            .product()
    }

    /// Sub-layout with the kept labels in original order.
    pub fn retain(&self, keep: &[Label]) -> Result<Self> {
        for &l in keep {
            self.position(l)?;
        }
        Ok(Self {
            factors: self
                .factors
                .iter()
                .copied()
                .filter(|f| keep.contains(&f.0))
                .collect(),
        })
    }

    pub fn is_qubit(&self) -> bool {
        self.factors.iter().all(|f| f.1 == 2)
    }

    /// Place value of each factor in a composite index.
    pub fn strides(&self) -> Vec<usize> {
        strides_for(&self.dims())
    }

    /// Splits every composite index into the part living on `mask` factors
    /// and the part living on the rest.
    fn split_offsets(&self, mask: &[bool]) -> (Vec<usize>, Vec<usize>) {
        let d = self.dim();
        let dims = self.dims();
        let strides = self.strides();
        let mut on = vec![0; d];
        let mut off = vec![0; d];
        for i in 0..d {
            for k in 0..dims.len() {
                let digit = (i / strides[k]) % dims[k];
                if mask[k] {
                    on[i] += digit * strides[k];
                } else {
                    off[i] += digit * strides[k];
                }
            }
        }
        (on, off)
    }

    fn mask_of(&self, labels: &[Label]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.len()];
        for &l in labels {
            mask[self.position(l)?] = true;
        }
        Ok(mask)
    }
}

impl fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (l, d)) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}:{d}")?;
        }
        write!(f, ")")
    }
}

fn strides_for(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows, b.cols);
    let mut m = ComplexMatrix::zeros(a.rows * br, a.cols * bc);
    let cols = m.cols;
    for i in 0..a.rows {
        for j in 0..a.cols {
            let x = a[(i, j)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                let row = (i * br + k) * cols + j * bc;
                for l in 0..bc {
                    m.data[row + l] = x * b.data[k * bc + l];
                }
            }
        }
    }
    m.hermitian = a.hermitian && b.hermitian;
    m
}

pub fn kron_all(ms: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::identity(1);
    for m in ms {
        acc = kron(&acc, m);
    }
    acc
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect()
}

fn check_square(m: &ComplexMatrix, layout: &SystemLayout) -> Result<()> {
    if !m.is_square() || m.rows != layout.dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.dim(),
            found: m.rows,
        });
    }
    Ok(())
}

/// Traces out every factor not in `keep`; the result lives on
/// `layout.retain(keep)`.
pub fn partial_trace(
    m: &ComplexMatrix,
    layout: &SystemLayout,
    keep: &[Label],
) -> Result<ComplexMatrix> {
    check_square(m, layout)?;
    let mask = layout.mask_of(keep)?;
    let kept = layout.retain(keep)?;
    let traced_mask: Vec<bool> = mask.iter().map(|b| !b).collect();
    let (dk, dt) = (kept.dim(), layout.dim() / kept.dim());
    let offsets = |sel: &[bool], n: usize| {
        let dims: Vec<usize> = layout
            .dims()
            .into_iter()
            .zip(sel)
            .filter(|p| *p.1)
            .map(|p| p.0)
            .collect();
        let full = layout.strides();
        let fs: Vec<usize> = full
            .into_iter()
            .zip(sel)
            .filter(|p| *p.1)
            .map(|p| p.0)
            .collect();
        let sub = strides_for(&dims);
        (0..n)
            .map(|i| {
                (0..dims.len())
                    .map(|k| ((i / sub[k]) % dims[k]) * fs[k])
                    .sum::<usize>()
            })
            .collect::<Vec<_>>()
    };
    let ko = offsets(&mask, dk);
    let to = offsets(&traced_mask, dt);
    let mut out = ComplexMatrix::zeros(dk, dk);
    for r in 0..dk {
        for cc in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &to {
                acc += m[(ko[r] + t, ko[cc] + t)];
            }
            out[(r, cc)] = acc;
        }
    }
    out.hermitian = m.hermitian;
    Ok(out)
}

/// Transpose in the computational basis on the listed factors only.
pub fn partial_transpose(
    m: &ComplexMatrix,
    layout: &SystemLayout,
    subset: &[Label],
) -> Result<ComplexMatrix> {
    check_square(m, layout)?;
    let mask = layout.mask_of(subset)?;
    let (on, off) = layout.split_offsets(&mask);
    let d = layout.dim();
    let mut out = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        for cc in 0..d {
            out.data[(off[r] + on[cc]) * d + off[cc] + on[r]] = m.data[r * d + cc];
        }
    }
    out.hermitian = m.hermitian;
    Ok(out)
}

/// `Tr_X(M) ⊗ 1_X/d_X` with the identity put back in place of the traced factors.
pub fn trace_replace(
    m: &ComplexMatrix,
    layout: &SystemLayout,
    labels: &[Label],
) -> Result<ComplexMatrix> {
    check_square(m, layout)?;
    let mask = layout.mask_of(labels)?;
    let dx: usize = layout
        .factors
        .iter()
        .zip(&mask)
        .filter(|p| *p.1)
        .map(|p| p.0 .1)
        .product();
    let (on, off) = layout.split_offsets(&mask);
    let mut xs: Vec<usize> = on.clone();
    xs.sort_unstable();
    xs.dedup();
    let d = layout.dim();
    let inv = 1.0 / dx as f64;
    let mut out = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        for cc in 0..d {
            if on[r] != on[cc] {
                continue;
            }
            let acc: C64 = xs
                .iter()
                .map(|&t| m.data[(off[r] + t) * d + off[cc] + t])
                .sum();
            out.data[r * d + cc] = acc * inv;
        }
    }
    out.hermitian = m.hermitian;
    Ok(out)
}

/// Reorders tensor factors; `order` lists the labels of the output layout.
pub fn permute_factors(
    m: &ComplexMatrix,
    layout: &SystemLayout,
    order: &[Label],
) -> Result<(ComplexMatrix, SystemLayout)> {
    check_square(m, layout)?;
    if order.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            found: order.len(),
        });
    }
    let new_layout = SystemLayout::new(
        order
            .iter()
            .map(|&l| Ok((l, layout.dim_of(l)?)))
            .collect::<Result<_>>()?,
    )?;
    let old_strides = layout.strides();
    let new_strides = new_layout.strides();
    let d = layout.dim();
    // map[new index] = old index
    let pos: Vec<usize> = order
        .iter()
        .map(|&l| layout.position(l))
        .collect::<Result<_>>()?;
    let map: Vec<usize> = (0..d)
        .map(|i| {
            (0..order.len())
                .map(|k| ((i / new_strides[k]) % new_layout.factors[k].1) * old_strides[pos[k]])
                .sum()
        })
        .collect();
    let mut out = ComplexMatrix::from_fn(d, d, |r, cc| m.data[map[r] * d + map[cc]]);
    out.hermitian = m.hermitian;
    Ok((out, new_layout))
}

/// Tr_label((ρ^T ⊗ 1)·M): feeds a state into one input factor.
pub fn contract_state(
    m: &ComplexMatrix,
    layout: &SystemLayout,
    label: Label,
    rho: &ComplexMatrix,
) -> Result<(ComplexMatrix, SystemLayout)> {
    check_square(m, layout)?;
    let k = layout.position(label)?;
    let dk = layout.factors[k].1;
    if rho.rows != dk || rho.cols != dk {
        return Err(Error::DimensionMismatch {
            expected: dk,
            found: rho.rows,
        });
    }
    let keep: Vec<Label> = layout
        .labels()
        .into_iter()
        .filter(|&l| l != label)
        .collect();
    let rest = layout.retain(&keep)?;
    let mut mask = vec![false; layout.len()];
    mask[k] = true;
    let (on, off) = layout.split_offsets(&mask);
    let d = layout.dim();
    let stride = layout.strides()[k];
    // off-indices of the rest, in rest order, are exactly the sorted distinct values of `off`
    let mut rest_idx: Vec<usize> = off.iter().copied().filter(|&o| on[o] == 0).collect();
    rest_idx.sort_unstable();
    rest_idx.dedup();
    let dr = rest.dim();
    debug_assert_eq!(rest_idx.len(), dr);
    let mut out = ComplexMatrix::zeros(dr, dr);
    for (r, &ro) in rest_idx.iter().enumerate() {
        for (cc, &co) in rest_idx.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..dk {
                for j in 0..dk {
                    // (ρ^T)[i,j] = ρ[j,i]; trace pairs row digit j with column digit i
                    acc += rho[(j, i)] * m.data[(ro + j * stride) * d + co + i * stride];
                }
            }
            out[(r, cc)] = acc;
        }
    }
    out.hermitian = m.hermitian && rho.hermitian;
    Ok((out, rest))
}

pub struct HermEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl HermEig {
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let v = self.vectors.as_faer();
        let scaled = Mat::<C64>::from_fn(n, n, |i, j| v[(i, j)] * f(self.values[j]));
        let p = &scaled * v.adjoint();
        let mut m = ComplexMatrix::from_faer(p.as_ref()).hermitian_part();
        m.hermitian = true;
        m
    }
}

const EIG_HERMITIAN_TOL: f64 = 1e-10;

pub fn herm_eig(m: &ComplexMatrix) -> Result<HermEig> {
    let dev = m.hermitian_deviation();
    let scale = m.max_abs().max(1.0);
    if dev > EIG_HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let h = m.hermitian_part();
    let e = h
        .as_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = e.S().column_vector();
    let values = (0..h.rows).map(|i| s[i].re).collect();
    Ok(HermEig {
        values,
        vectors: ComplexMatrix::from_faer(e.U()),
    })
}

pub fn eigvalsh(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(herm_eig(m)?.values)
}

/// Clips negative eigenvalues to zero.
pub fn psd_project(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = herm_eig(m)?;
    if e.values.iter().all(|&x| x >= 0.0) {
        return Ok(m.hermitian_part());
    }
    Ok(e.reconstruct(|x| x.max(0.0)))
}

/// Orthonormal Hermitian basis of `d×d` matrices: identity/√d first, then the
/// generalized Gell-Mann matrices over √2 (symmetric, antisymmetric, diagonal).
/// For `d = 2` this is `(I, X, Y, Z)/√2`.
pub fn local_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    out.push(ComplexMatrix::identity(d).scale(1.0 / (d as f64).sqrt()));
    let h = 1.0 / 2.0f64.sqrt();
    for j in 0..d {
        for k in j + 1..d {
            let mut s = ComplexMatrix::zeros(d, d);
            s[(j, k)] = c(h, 0.0);
            s[(k, j)] = c(h, 0.0);
            out.push(s);
            let mut a = ComplexMatrix::zeros(d, d);
            a[(j, k)] = c(0.0, -h);
            a[(k, j)] = c(0.0, h);
            out.push(a);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = ComplexMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = c(norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) * norm, 0.0);
        out.push(m);
    }
    if d == 2 {
        // Gell-Mann order for d = 2 is (I, X, Y, Z) already
        debug_assert_eq!(out.len(), 4);
    }
    out.into_iter()
        .map(|m| m.mark_hermitian().expect("basis element is Hermitian"))
        .collect()
}

/// Converter between Hermitian matrices and real coordinates in the product
/// basis built from [`local_basis`] on each factor.
#[derive(Clone, Debug)]
pub struct CoordMap {
    layout: SystemLayout,
    dims: Vec<usize>,
    locals: Vec<Vec<ComplexMatrix>>,
    row_off: Vec<usize>,
    col_off: Vec<usize>,
}

impl CoordMap {
    pub fn new(layout: &SystemLayout) -> Self {
        let dims = layout.dims();
        let n = dims.len();
        let mut pair_stride = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            pair_stride[k] = pair_stride[k + 1] * dims[k + 1] * dims[k + 1];
        }
        let strides = layout.strides();
        let d = layout.dim();
        let mut row_off = vec![0; d];
        let mut col_off = vec![0; d];
        for i in 0..d {
            for k in 0..n {
                let digit = (i / strides[k]) % dims[k];
                row_off[i] += digit * dims[k] * pair_stride[k];
                col_off[i] += digit * pair_stride[k];
            }
        }
        let locals = dims.iter().map(|&dk| local_basis(dk)).collect();
        Self {
            layout: layout.clone(),
            dims,
            locals,
            row_off,
            col_off,
        }
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    /// Number of real coordinates, `d²`.
    pub fn len(&self) -> usize {
        self.layout.dim() * self.layout.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-factor basis digits of a coordinate index.
    pub fn digits(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            let q = self.dims[k] * self.dims[k];
            out[k] = idx % q;
            idx /= q;
        }
        out
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&g, &d)| acc * d * d + g)
    }

    /// Coordinates `c_μ = Tr(B_μ M)`; the anti-Hermitian part is dropped.
    pub fn to_coords(&self, m: &ComplexMatrix) -> Vec<f64> {
        let d = self.layout.dim();
        assert_eq!(m.rows, d, "matrix does not match layout");
        let mut t = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for cc in 0..d {
                t[self.row_off[r] + self.col_off[cc]] = m.data[r * d + cc];
            }
        }
        for (k, &dk) in self.dims.iter().enumerate() {
            // Tr(B M) = Σ_{r,c} B[c,r] M[r,c]
            let op: Vec<C64> = self.locals[k]
                .iter()
                .flat_map(|b| (0..dk * dk).map(move |rc| b[(rc % dk, rc / dk)]))
                .collect();
            t = mode_apply(
                &t,
                &self.dims.iter().map(|d| d * d).collect::<Vec<_>>(),
                k,
                &op,
                dk * dk,
            );
        }
        t.into_iter().map(|z| z.re).collect()
    }

    pub fn from_coords(&self, coords: &[f64]) -> ComplexMatrix {
        let d = self.layout.dim();
        assert_eq!(
            coords.len(),
            d * d,
            "coordinate count does not match layout"
        );
        let mut t: Vec<C64> = coords.iter().map(|&x| c(x, 0.0)).collect();
        for (k, &dk) in self.dims.iter().enumerate() {
            let q = dk * dk;
            // op[(r,c), μ] = B_μ[r,c]
            let mut op = vec![C64::new(0.0, 0.0); q * q];
            for (mu, b) in self.locals[k].iter().enumerate() {
                for rc in 0..q {
                    op[rc * q + mu] = b[(rc / dk, rc % dk)];
                }
            }
            t = mode_apply(
                &t,
                &self.dims.iter().map(|d| d * d).collect::<Vec<_>>(),
                k,
                &op,
                q,
            );
        }
        let mut m = ComplexMatrix::zeros(d, d);
        for r in 0..d {
            for cc in 0..d {
                m.data[r * d + cc] = t[self.row_off[r] + self.col_off[cc]];
            }
        }
        m.hermitian_part()
    }
}

/// Applies `op` (row-major `q×q`) along mode `k` of a tensor with sizes `sizes`.
fn mode_apply(t: &[C64], sizes: &[usize], k: usize, op: &[C64], q: usize) -> Vec<C64> {
    let inner: usize = sizes[k + 1..].iter().product();
    let outer: usize = sizes[..k].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); t.len()];
    for o in 0..outer {
        let base = o * q * inner;
        for a in 0..q {
            let dst = base + a * inner;
            for b in 0..q {
                let w = op[a * q + b];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = base + b * inner;
                for i in 0..inner {
                    out[dst + i] += w * t[src + i];
                }
            }
        }
    }
    out
}

/// A Hermitian operator stored as real coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianCoords {
    pub layout: SystemLayout,
    pub coords: Vec<f64>,
}

impl HermitianCoords {
    pub fn from_matrix(m: &ComplexMatrix, layout: &SystemLayout) -> Result<Self> {
        check_square(m, layout)?;
        let dev = m.hermitian_deviation();
        if dev > EIG_HERMITIAN_TOL * m.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Self {
            layout: layout.clone(),
            coords: CoordMap::new(layout).to_coords(m),
        })
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        CoordMap::new(&self.layout).from_coords(&self.coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli(k: usize) -> ComplexMatrix {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        let d = match k {
            0 => vec![o, z, z, o],
            1 => vec![z, o, o, z],
            2 => vec![z, -i, i, z],
            _ => vec![o, z, z, -o],
        };
        ComplexMatrix::new(2, 2, d).unwrap()
    }

    fn qubits(n: usize) -> SystemLayout {
        SystemLayout::new(Label::ALL[..n].iter().map(|&l| (l, 2)).collect()).unwrap()
    }

    #[test]
    fn kron_basis_order() {
        let p0 = ComplexMatrix::diag(&[1.0, 0.0]);
        let p1 = ComplexMatrix::diag(&[0.0, 1.0]);
        let k = kron(&p0, &p1);
        assert_eq!(k, ComplexMatrix::diag(&[0.0, 1.0, 0.0, 0.0]));
        assert_eq!(
            kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)),
            ComplexMatrix::identity(4)
        );
    }

    #[test]
    fn kron_x_z_on_00() {
        let v =
            kron(&pauli(1), &pauli(3)).apply(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(v, vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn partial_trace_of_bell_is_maximally_mixed() {
        let h = 1.0 / 2.0f64.sqrt();
        let phi = ComplexMatrix::outer(&[c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]);
        let l = qubits(2);
        let r = partial_trace(&phi, &l, &[Label::Pc]).unwrap();
        assert!(r.sub(&ComplexMatrix::identity(2).scale(0.5)).max_abs() < 1e-15);
        assert!(partial_trace(&phi, &l, &[Label::Fc]).is_err());
    }

    #[test]
    fn partial_transpose_of_bell_is_swap() {
        let h = 1.0 / 2.0f64.sqrt();
        let phi = ComplexMatrix::outer(&[c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]);
        let l = qubits(2);
        let pt = partial_transpose(&phi, &l, &[Label::Pt]).unwrap();
        let mut swap = ComplexMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            swap[(i, j)] = c(0.5, 0.0);
        }
        assert!(pt.sub(&swap).max_abs() < 1e-15);
        let ev = eigvalsh(&pt).unwrap();
        let expect = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_of_x() {
        let e = herm_eig(&pauli(1)).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        let v = &e.vectors;
        // first eigenvector ∝ |−⟩
        let ratio = v[(1, 0)] / v[(0, 0)];
        assert!((ratio + c(1.0, 0.0)).norm() < 1e-12);
        assert!(herm_eig(
            &ComplexMatrix::new(
                2,
                2,
                vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]
            )
            .unwrap()
        )
        .is_err());
    }

    #[test]
    fn psd_projection_clips() {
        let m = ComplexMatrix::diag(&[1.0, -1.0]);
        assert!(
            psd_project(&m)
                .unwrap()
                .sub(&ComplexMatrix::diag(&[1.0, 0.0]))
                .max_abs()
                < 1e-15
        );
        let zh = pauli(3).sub(&ComplexMatrix::identity(2).scale(0.5));
        assert!(
            psd_project(&zh)
                .unwrap()
                .sub(&ComplexMatrix::diag(&[0.5, 0.0]))
                .max_abs()
                < 1e-14
        );
    }

    #[test]
    fn two_qubit_coords_are_pauli_strings() {
        let l = qubits(2);
        let map = CoordMap::new(&l);
        // X ⊗ Z has a single coordinate at index 1·4 + 3 = 7 equal to Tr((X⊗Z)(X⊗Z))/2 = 2
        let xz = kron(&pauli(1), &pauli(3));
        let co = map.to_coords(&xz);
        for (i, v) in co.iter().enumerate() {
            let expect = if i == 7 { 2.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-14, "{i}: {v}");
        }
        assert!(map.from_coords(&co).sub(&xz).max_abs() < 1e-14);
    }

    #[test]
    fn qutrit_basis_round_trip() {
        let l = SystemLayout::new(vec![(Label::Ain, 3), (Label::Aout, 2)]).unwrap();
        let map = CoordMap::new(&l);
        let co: Vec<f64> = (0..36).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let m = map.from_coords(&co);
        let back = map.to_coords(&m);
        for (a, b) in co.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn permute_then_back() {
        let l = qubits(3);
        let m = ComplexMatrix::from_fn(8, 8, |i, j| c((i * 8 + j) as f64, (i as f64) - (j as f64)));
        let (p, pl) = permute_factors(&m, &l, &[Label::Ain, Label::Pc, Label::Pt]).unwrap();
        let (q, ql) = permute_factors(&p, &pl, &[Label::Pc, Label::Pt, Label::Ain]).unwrap();
        assert_eq!(ql, l);
        assert_eq!(q, m);
        assert_ne!(p, m);
    }

    #[test]
    fn contract_state_matches_partial_trace_for_identity_like_input() {
        let l = qubits(2);
        let a = ComplexMatrix::diag(&[0.25, 0.75]);
        let b = pauli(1);
        let m = kron(&a, &b);
        let rho = ComplexMatrix::diag(&[0.5, 0.5]);
        let (r, rl) = contract_state(&m, &l, Label::Pc, &rho).unwrap();
        assert_eq!(rl.labels(), vec![Label::Pt]);
        assert!(r.sub(&b.scale(0.5)).max_abs() < 1e-15);
    }
}
