//! Choi operators of channels, measurements and measure-and-reprepare
//! instruments. Choi operators are unnormalized, over `(in, out)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::qsys::{c, eigvalsh, kron, ComplexMatrix, C64};

pub const CHOI_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiOperator {
    pub matrix: ComplexMatrix,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl ChoiOperator {
    pub fn new(matrix: ComplexMatrix, in_dim: usize, out_dim: usize) -> Result<Self> {
        let d = in_dim * out_dim;
        if !matrix.is_square() || matrix.rows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.rows(),
            });
        }
        Ok(Self {
            matrix,
            in_dim,
            out_dim,
        })
    }

    /// Completely positive within `tol`.
    pub fn is_cp(&self, tol: f64) -> bool {
        matches!(eigvalsh(&self.matrix), Ok(ev) if ev[0] >= -tol)
    }

    /// `Tr_out C = 1_in` within `tol`.
    pub fn is_tp(&self, tol: f64) -> bool {
        self.tp_deviation() <= tol
    }

    pub fn tp_deviation(&self) -> f64 {
        let t = trace_out(&self.matrix, self.in_dim, self.out_dim);
        t.sub(&ComplexMatrix::identity(self.in_dim)).max_abs()
    }

    pub fn sum(elements: &[ChoiOperator]) -> Result<ChoiOperator> {
        let first = elements
            .first()
            .ok_or(Error::Invalid("empty operator list".into()))?;
        let mut acc = first.matrix.clone();
        for e in &elements[1..] {
            if (e.in_dim, e.out_dim) != (first.in_dim, first.out_dim) {
                return Err(Error::DimensionMismatch {
                    expected: first.in_dim * first.out_dim,
                    found: e.in_dim * e.out_dim,
                });
            }
            acc = acc.add(&e.matrix);
        }
        ChoiOperator::new(acc, first.in_dim, first.out_dim)
    }
}

fn trace_out(m: &ComplexMatrix, din: usize, dout: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(din, din, |i, j| {
        (0..dout).map(|k| m[(i * dout + k, j * dout + k)]).sum()
    })
}

fn unitary_deviation(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    u.adjoint()
        .matmul(u)
        .sub(&ComplexMatrix::identity(u.rows()))
        .max_abs()
}

/// `|U⟩⟩ = Σ_i |i⟩ ⊗ U|i⟩`.
pub fn choi_vector_of_unitary(u: &ComplexMatrix) -> Result<Vec<C64>> {
    let dev = unitary_deviation(u);
    if dev > CHOI_TOL {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let d = u.rows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            v.push(u[(j, i)]);
        }
    }
    Ok(v)
}

pub fn choi_of_unitary(u: &ComplexMatrix) -> Result<ChoiOperator> {
    let v = choi_vector_of_unitary(u)?;
    ChoiOperator::new(ComplexMatrix::outer(&v), u.rows(), u.rows())
}

/// `Tr_in((ρ^T ⊗ 1)·C)`.
pub fn apply_channel(ch: &ChoiOperator, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !rho.is_square() || rho.rows() != ch.in_dim {
        return Err(Error::DimensionMismatch {
            expected: ch.in_dim,
            found: rho.rows(),
        });
    }
    let (din, dout) = (ch.in_dim, ch.out_dim);
    let m = &ch.matrix;
    Ok(ComplexMatrix::from_fn(dout, dout, |a, b| {
        let mut acc = c(0.0, 0.0);
        for i in 0..din {
            for j in 0..din {
                acc += rho[(j, i)] * m[(j * dout + a, i * dout + b)];
            }
        }
        acc
    }))
}

fn check_psd(m: &ComplexMatrix) -> Result<()> {
    let ev = eigvalsh(m)?;
    if ev[0] < -CHOI_TOL {
        return Err(Error::NotPsd { min_eig: ev[0] });
    }
    Ok(())
}

fn check_density(sigma: &ComplexMatrix) -> Result<()> {
    check_psd(sigma)?;
    let t = sigma.trace();
    if (t - c(1.0, 0.0)).norm() > CHOI_TOL {
        return Err(Error::NotNormalized { norm: t.re });
    }
    Ok(())
}

/// `R = effect^T ⊗ σ`.
pub fn measure_reprepare(effect: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<ChoiOperator> {
    check_psd(effect)?;
    check_density(sigma)?;
    ChoiOperator::new(
        kron(&effect.transpose(), sigma),
        effect.rows(),
        sigma.rows(),
    )
}

/// Replacement channel `ρ ↦ Tr(ρ)·σ`, Choi `1 ⊗ σ`.
pub fn replacement_channel(in_dim: usize, sigma: &ComplexMatrix) -> Result<ChoiOperator> {
    measure_reprepare(&ComplexMatrix::identity(in_dim), sigma)
}

/// Fully depolarizing channel, Choi `1 ⊗ 1/d`.
pub fn depolarizing(d: usize) -> ChoiOperator {
    let m = kron(
        &ComplexMatrix::identity(d),
        &ComplexMatrix::identity(d).scale(1.0 / d as f64),
    );
    ChoiOperator {
        matrix: m,
        in_dim: d,
        out_dim: d,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    pub effects: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<ComplexMatrix>) -> Result<Self> {
        let d = effects
            .first()
            .ok_or(Error::Invalid("empty POVM".into()))?
            .rows();
        let mut acc = ComplexMatrix::zeros(d, d);
        for e in &effects {
            check_psd(e)?;
            acc = acc.add(e);
        }
        let dev = acc.sub(&ComplexMatrix::identity(d)).max_abs();
        if dev > CHOI_TOL {
            return Err(Error::Invalid(alloc::format!(
                "effects sum to identity only within {dev:e}"
            )));
        }
        Ok(Self { effects })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    pub elements: Vec<ChoiOperator>,
    pub outcomes: Vec<usize>,
}

impl Instrument {
    pub fn new(elements: Vec<ChoiOperator>, outcomes: Vec<usize>) -> Result<Self> {
        if elements.len() != outcomes.len() {
            return Err(Error::DimensionMismatch {
                expected: elements.len(),
                found: outcomes.len(),
            });
        }
        for e in &elements {
            check_psd(&e.matrix)?;
        }
        let total = ChoiOperator::sum(&elements)?;
        let dev = total.tp_deviation();
        if dev > CHOI_TOL {
            return Err(Error::Invalid(alloc::format!(
                "instrument is not trace preserving ({dev:e})"
            )));
        }
        Ok(Self { elements, outcomes })
    }

    /// Measure with `povm`, reprepare `sigma` regardless of the outcome.
    pub fn measure_and_reprepare(povm: &Povm, sigma: &ComplexMatrix) -> Result<Self> {
        let elements = povm
            .effects
            .iter()
            .map(|e| measure_reprepare(e, sigma))
            .collect::<Result<Vec<_>>>()?;
        let outcomes = (1..=elements.len()).collect();
        Self::new(elements, outcomes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn m2(a: [C64; 4]) -> ComplexMatrix {
        ComplexMatrix::new(2, 2, a.to_vec()).unwrap()
    }
    fn x() -> ComplexMatrix {
        m2([c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }
    fn y() -> ComplexMatrix {
        m2([c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
    }

    #[test]
    fn choi_vectors_by_hand() {
        let id = choi_vector_of_unitary(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(id, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(
            choi_vector_of_unitary(&x()).unwrap(),
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]
        );
        // column 0 of Y is (0, i), column 1 is (−i, 0)
        assert_eq!(
            choi_vector_of_unitary(&y()).unwrap(),
            vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]
        );
        assert!(choi_vector_of_unitary(&ComplexMatrix::diag(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn channel_actions() {
        let plus = ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let id = choi_of_unitary(&ComplexMatrix::identity(2)).unwrap();
        assert!(apply_channel(&id, &plus).unwrap().sub(&plus).max_abs() < 1e-15);
        let dep = depolarizing(2);
        let out = apply_channel(&dep, &plus).unwrap();
        assert!(out.sub(&ComplexMatrix::identity(2).scale(0.5)).max_abs() < 1e-15);
        let flip = apply_channel(
            &choi_of_unitary(&x()).unwrap(),
            &ComplexMatrix::diag(&[1.0, 0.0]),
        )
        .unwrap();
        assert!(flip.sub(&ComplexMatrix::diag(&[0.0, 1.0])).max_abs() < 1e-15);
        assert!(apply_channel(&id, &ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn z_measure_reprepare_is_an_instrument() {
        let p0 = ComplexMatrix::diag(&[1.0, 0.0]);
        let p1 = ComplexMatrix::diag(&[0.0, 1.0]);
        let plus = ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let r = measure_reprepare(&p0, &plus).unwrap();
        assert_eq!(r.matrix, kron(&p0, &plus));
        let povm = Povm::new(vec![p0.clone(), p1]).unwrap();
        let inst = Instrument::measure_and_reprepare(&povm, &plus).unwrap();
        assert!(ChoiOperator::sum(&inst.elements).unwrap().is_tp(1e-12));
        let whole = measure_reprepare(&ComplexMatrix::identity(2), &p0).unwrap();
        assert!(whole.is_tp(1e-12) && whole.is_cp(1e-12));
        assert!(measure_reprepare(&ComplexMatrix::diag(&[1.0, -0.5]), &p0).is_err());
    }
}
