//! Causal separability: witnesses, robustness and random separable processes.
//!
//! A witness `G` is stored by its coordinates in the product basis, so that
//! `Tr(G·W) = g·w`. Witnesses live in a family-dependent witness space: the
//! span of the family's setting operators, further restricted to operators
//! acting trivially on the past for the extended-control definition.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

use crate::conic::{solve, Cone, ProgramBuilder, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::procmat::{
    comb_subspace, validity_projector, CausalOrder, CoordSubspace, ProcessMatrix,
};
use crate::qsys::{c, kron, partial_trace, ComplexMatrix, CoordMap, Label, SystemLayout, C64};
use crate::tomoset::{BornMatrix, SettingFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SeparabilityDefinition {
    /// Convex mixtures of the two causally ordered combs.
    ConvexMixture,
    /// Separability of the process with its past depolarized, which admits
    /// classical control of the order by the past.
    ExtendedControl,
}

impl SeparabilityDefinition {
    pub const ALL: [SeparabilityDefinition; 2] = [Self::ConvexMixture, Self::ExtendedControl];

    pub fn name(self) -> &'static str {
        match self {
            Self::ConvexMixture => "convex",
            Self::ExtendedControl => "extended",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "convex" => Ok(Self::ConvexMixture),
            "extended" => Ok(Self::ExtendedControl),
            other => Err(Error::Invalid(format!(
                "unknown definition `{other}` (convex|extended)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseType {
    WhiteNoise,
    Generalized,
}

impl NoiseType {
    pub const ALL: [NoiseType; 2] = [Self::WhiteNoise, Self::Generalized];

    pub fn name(self) -> &'static str {
        match self {
            Self::WhiteNoise => "white",
            Self::Generalized => "generalized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(Self::WhiteNoise),
            "generalized" => Ok(Self::Generalized),
            other => Err(Error::Invalid(format!(
                "unknown noise type `{other}` (white|generalized)"
            ))),
        }
    }
}

/// Status and residuals of the conic solve behind a result.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub layout: SystemLayout,
    pub coords: Vec<f64>,
    /// Coefficients over the family's setting operators, `G = Σ α_k S_k`.
    pub alpha: Vec<f64>,
    pub noise: NoiseType,
    pub definition: SeparabilityDefinition,
    pub family: SettingFamily,
    pub solver: Option<SolverReport>,
}

impl Witness {
    /// Rebuilds a witness from its setting coefficients.
    pub fn from_alpha(
        alpha: Vec<f64>,
        family: SettingFamily,
        noise: NoiseType,
        definition: SeparabilityDefinition,
    ) -> Result<Self> {
        let born = BornMatrix::new(family);
        if alpha.len() != born.rows() {
            return Err(Error::DimensionMismatch {
                expected: born.rows(),
                found: alpha.len(),
            });
        }
        let coords = born.apply_transpose(&alpha);
        Ok(Self {
            layout: born.layout.clone(),
            coords,
            alpha,
            noise,
            definition,
            family,
            solver: None,
        })
    }

    pub fn matrix(&self) -> ComplexMatrix {
        CoordMap::new(&self.layout).from_coords(&self.coords)
    }

    pub fn evaluate(&self, w: &ProcessMatrix) -> Result<f64> {
        evaluate_witness(self, w)
    }

    /// Largest deviation between `G` and `Σ α_k S_k`.
    pub fn alpha_residual(&self) -> f64 {
        let born = BornMatrix::new(self.family);
        let g = born.apply_transpose(&self.alpha);
        g.iter()
            .zip(&self.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.coords.iter_mut().for_each(|x| *x *= lambda);
        out.alpha.iter_mut().for_each(|x| *x *= lambda);
        out
    }
}

/// `Tr(G·W)`.
pub fn evaluate_witness(g: &Witness, w: &ProcessMatrix) -> Result<f64> {
    if w.layout != g.layout {
        return Err(Error::UnsupportedLayout(format!(
            "witness on {} applied to {}",
            g.layout, w.layout
        )));
    }
    Ok(g.coords.iter().zip(w.coords()).map(|(a, b)| a * b).sum())
}

fn require_simplified(w: &ProcessMatrix) -> Result<()> {
    if w.layout != SystemLayout::simplified_switch() {
        return Err(Error::UnsupportedLayout(format!(
            "expected {}, found {}",
            SystemLayout::simplified_switch(),
            w.layout
        )));
    }
    Ok(())
}

/// Coordinates a witness may use for this family and definition.
pub fn witness_space(
    family: SettingFamily,
    definition: SeparabilityDefinition,
) -> Result<CoordSubspace> {
    let born = BornMatrix::new(family);
    let span = born.span()?;
    match definition {
        SeparabilityDefinition::ConvexMixture => Ok(span),
        SeparabilityDefinition::ExtendedControl => {
            let map = CoordMap::new(&span.layout);
            let pos = span.layout.position(Label::Pt)?;
            let mask = (0..map.len())
                .map(|j| span.contains_index(j) && map.digits(j)[pos] == 0)
                .collect();
            CoordSubspace::from_mask(span.layout.clone(), mask)
        }
    }
}

fn report(sol: &crate::conic::Solution) -> SolverReport {
    SolverReport {
        status: sol.status,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
    }
}

/// Witness minimizing `Tr(G·W)`.
///
/// `G` is constrained to the witness space, to the dual cone of each causal
/// order's combs and to the noise normalization: `Tr(G·1_W) ≤ 1` for white
/// noise, `Tr(G·Ω) ≤ 1` for every valid `Ω` in the generalized case.
pub fn optimal_witness(
    w: &ProcessMatrix,
    family: SettingFamily,
    noise: NoiseType,
    definition: SeparabilityDefinition,
    settings: &SolverSettings,
) -> Result<Witness> {
    require_simplified(w)?;
    let layout = w.layout.clone();
    let n = layout.dim() * layout.dim();
    let space = witness_space(family, definition)?;
    let target = w.coords();

    let mut b = ProgramBuilder::new();
    let g = b.free("g", n)?;
    for j in space.complement_indices() {
        b.constrain(vec![(b.var(g, j), 1.0)], 0.0)?;
    }
    for (name, order) in [("p_ab", CausalOrder::AThenB), ("p_ba", CausalOrder::BThenA)] {
        let comb = comb_subspace(order, &layout)?;
        crate::conic::dual_cone_membership(
            &mut b,
            name,
            &comb,
            |b, j| vec![(b.var(g, j), 1.0)],
            |_| 0.0,
        )?;
    }
    match noise {
        NoiseType::WhiteNoise => {
            let s = b.nonneg("slack", 1)?;
            b.constrain(vec![(b.var(g, 0), 1.0), (b.var(s, 0), 1.0)], 1.0)?;
        }
        NoiseType::Generalized => {
            // 1_W·t − G in the dual cone of PSD ∩ span of valid processes
            let valid = validity_projector(&layout)?;
            crate::conic::dual_cone_membership(
                &mut b,
                "p_omega",
                &valid.subspace,
                |b, j| vec![(b.var(g, j), -1.0)],
                |j| if j == 0 { -1.0 } else { 0.0 },
            )?;
        }
    }
    for (j, &t) in target.iter().enumerate() {
        if t != 0.0 {
            b.add_objective(b.var(g, j), t);
        }
    }
    let program = b.build();
    let sol = solve(&program, settings)?.require_solved()?;
    let coords = space.project(sol.block(&program, g));
    let born = BornMatrix::new(family);
    let alpha = born.expansion_coefficients(&coords)?;
    Ok(Witness {
        layout,
        coords,
        alpha,
        noise,
        definition,
        family,
        solver: Some(report(&sol)),
    })
}

#[derive(Clone, Debug)]
pub struct RobustnessResult {
    pub r: f64,
    pub noise: NoiseType,
    pub definition: SeparabilityDefinition,
    pub family: SettingFamily,
    /// `S_{A>B}` and `S_{B>A}`, normalized so that they sum to `(W + rΩ)/(1+r)`.
    pub s_ab: ComplexMatrix,
    pub s_ba: ComplexMatrix,
    /// Noise process `Ω` (white noise, or the optimal valid process).
    pub noise_process: ComplexMatrix,
    /// Largest coordinate deviation of the decomposition on the witness space.
    pub certificate_residual: f64,
    pub solver: SolverReport,
}

/// Smallest `r` such that `(W + rΩ)/(1+r)` is causally separable.
///
/// Separability is tested on the witness space of `family` and `definition`,
/// which makes this the dual of [`optimal_witness`].
pub fn robustness(
    w: &ProcessMatrix,
    family: SettingFamily,
    noise: NoiseType,
    definition: SeparabilityDefinition,
    settings: &SolverSettings,
) -> Result<RobustnessResult> {
    require_simplified(w)?;
    let layout = w.layout.clone();
    let map = CoordMap::new(&layout);
    let space = witness_space(family, definition)?;
    let target = w.coords();

    let mut b = ProgramBuilder::new();
    let mut parts = Vec::new();
    for (name, order) in [("s_ab", CausalOrder::AThenB), ("s_ba", CausalOrder::BThenA)] {
        let s = b.psd(name, &layout)?;
        for j in comb_subspace(order, &layout)?.complement_indices() {
            b.constrain(vec![(b.var(s, j), 1.0)], 0.0)?;
        }
        parts.push(s);
    }
    let (noise_block, noise_index) = match noise {
        NoiseType::WhiteNoise => {
            let r = b.nonneg("r", 1)?;
            b.add_objective(b.var(r, 0), 1.0);
            (r, None)
        }
        NoiseType::Generalized => {
            let om = b.add_block("omega", Cone::Psd(layout.clone()), map.len())?;
            for j in validity_projector(&layout)?.subspace.complement_indices() {
                b.constrain(vec![(b.var(om, j), 1.0)], 0.0)?;
            }
            b.add_objective(b.var(om, 0), 1.0);
            (om, Some(()))
        }
    };
    for j in space.indices() {
        let mut terms = vec![(b.var(parts[0], j), 1.0), (b.var(parts[1], j), 1.0)];
        match noise_index {
            None if j == 0 => terms.push((b.var(noise_block, 0), -1.0)),
            None => {}
            Some(()) => terms.push((b.var(noise_block, j), -1.0)),
        }
        b.constrain(terms, target[j])?;
    }
    let program = b.build();
    let sol = solve(&program, settings)?.require_solved()?;
    let r = sol.objective.max(0.0);
    let scale = 1.0 / (1.0 + r);
    let s_ab: Vec<f64> = sol
        .block(&program, parts[0])
        .iter()
        .map(|x| x * scale)
        .collect();
    let s_ba: Vec<f64> = sol
        .block(&program, parts[1])
        .iter()
        .map(|x| x * scale)
        .collect();
    let omega: Vec<f64> = match noise {
        NoiseType::WhiteNoise => {
            let mut e = vec![0.0; map.len()];
            e[0] = 1.0;
            e
        }
        NoiseType::Generalized if sol.objective > 1e-9 => sol
            .block(&program, noise_block)
            .iter()
            .map(|x| x / sol.objective)
            .collect(),
        NoiseType::Generalized => {
            let mut e = vec![0.0; map.len()];
            e[0] = 1.0;
            e
        }
    };
    let certificate_residual = space
        .indices()
        .into_iter()
        .map(|j| (s_ab[j] + s_ba[j] - (target[j] + r * omega[j]) * scale).abs())
        .fold(0.0, f64::max);
    Ok(RobustnessResult {
        r,
        noise,
        definition,
        family,
        s_ab: map.from_coords(&s_ab),
        s_ba: map.from_coords(&s_ba),
        noise_process: map.from_coords(&omega),
        certificate_residual,
        solver: report(&sol),
    })
}

fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let mut vs: Vec<Vec<C64>> = Vec::with_capacity(cols);
    while vs.len() < cols {
        let mut v: Vec<C64> = (0..rows)
            .map(|_| c(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        for u in &vs {
            let ip: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= ip * y;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            vs.push(v);
        }
    }
    ComplexMatrix::from_fn(rows, cols, |i, j| vs[j][i])
}

/// Random causally ordered process on the simplified layout: a sequence of
/// random isometries with two-dimensional memories, the last one discarding a
/// two-dimensional environment.
pub fn random_comb<R: Rng + ?Sized>(order: CausalOrder, rng: &mut R) -> Result<ProcessMatrix> {
    let layout = SystemLayout::simplified_switch();
    // V1: P → first_in ⊗ M1, V2: first_out ⊗ M1 → second_in ⊗ M2, V3: second_out ⊗ M2 → F ⊗ E
    let v1 = random_isometry(4, 2, rng);
    let v2 = random_isometry(4, 4, rng);
    let v3 = random_isometry(4, 4, rng);
    // vector over (p, i1, o1, i2, o2, f, e)
    let mut psi = vec![c(0.0, 0.0); 128];
    for p in 0..2 {
        for i1 in 0..2 {
            for o1 in 0..2 {
                for i2 in 0..2 {
                    for o2 in 0..2 {
                        for f in 0..2 {
                            for e in 0..2 {
                                let mut acc = c(0.0, 0.0);
                                for m1 in 0..2 {
                                    for m2 in 0..2 {
                                        acc += v1[(i1 * 2 + m1, p)]
                                            * v2[(i2 * 2 + m2, o1 * 2 + m1)]
                                            * v3[(f * 2 + e, o2 * 2 + m2)];
                                    }
                                }
                                let idx = ((((((p * 2 + i1) * 2 + o1) * 2 + i2) * 2 + o2) * 2 + f)
                                    * 2)
                                    + e;
                                psi[idx] = acc;
                            }
                        }
                    }
                }
            }
        }
    }
    let pure = ComplexMatrix::outer(&psi);
    let ext = SystemLayout::new(vec![
        (Label::Pt, 2),
        (Label::Ain, 2),
        (Label::Aout, 2),
        (Label::Bin, 2),
        (Label::Bout, 2),
        (Label::Fc, 2),
        (Label::Ft, 2),
    ])?;
    let m = partial_trace(
        &pure,
        &ext,
        &[
            Label::Pt,
            Label::Ain,
            Label::Aout,
            Label::Bin,
            Label::Bout,
            Label::Fc,
        ],
    )?;
    let m = match order {
        CausalOrder::AThenB => m,
        CausalOrder::BThenA => {
            // the first party in the circuit is Bob: swap the A and B slots
            let slots = SystemLayout::new(vec![
                (Label::Pt, 2),
                (Label::Bin, 2),
                (Label::Bout, 2),
                (Label::Ain, 2),
                (Label::Aout, 2),
                (Label::Fc, 2),
            ])?;
            crate::qsys::permute_factors(&m, &slots, &layout.labels())?.0
        }
    };
    ProcessMatrix::new(m, layout)
}

/// Random causally separable process under `definition`.
///
/// Convex mixtures of random combs of both orders are separable under both
/// definitions; the extended definition also admits order controlled by a
/// classical past.
pub fn random_separable<R: Rng + ?Sized>(
    definition: SeparabilityDefinition,
    rng: &mut R,
) -> Result<ProcessMatrix> {
    let ab = random_comb(CausalOrder::AThenB, rng)?;
    let ba = random_comb(CausalOrder::BThenA, rng)?;
    let lambda: f64 = rng.random();
    match definition {
        SeparabilityDefinition::ConvexMixture => {
            ProcessMatrix::mixture(&[(lambda, &ab), (1.0 - lambda, &ba)])
        }
        SeparabilityDefinition::ExtendedControl => {
            let layout = ab.layout.clone();
            let rest: Vec<Label> = layout
                .labels()
                .into_iter()
                .filter(|&l| l != Label::Pt)
                .collect();
            let cut = partial_trace(&ab.matrix, &layout, &rest)?;
            let cut_ba = partial_trace(&ba.matrix, &layout, &rest)?;
            let p0 = ComplexMatrix::diag(&[1.0, 0.0]);
            let p1 = ComplexMatrix::diag(&[0.0, 1.0]);
            let ctrl = kron(&p0, &cut.scale(0.5)).add(&kron(&p1, &cut_ba.scale(0.5)));
            let controlled = ProcessMatrix::new(ctrl, layout)?;
            let mix = ProcessMatrix::mixture(&[(lambda, &ab), (1.0 - lambda, &ba)])?;
            let t: f64 = rng.random();
            ProcessMatrix::mixture(&[(t, &controlled), (1.0 - t, &mix)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procmat::{comb_membership, comb_process, switch_simplified, CONTROL_Y_MINUS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_combs_are_combs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for order in CausalOrder::BOTH {
            let w = random_comb(order, &mut rng).unwrap();
            assert!(comb_membership(&w, order, 1e-9).unwrap().passed);
        }
        let w = random_separable(SeparabilityDefinition::ExtendedControl, &mut rng).unwrap();
        w.validate().unwrap();
    }

    #[test]
    fn witness_space_dimensions() {
        use SeparabilityDefinition::*;
        assert_eq!(
            witness_space(SettingFamily::Full, ConvexMixture)
                .unwrap()
                .dim(),
            4096
        );
        assert_eq!(
            witness_space(SettingFamily::Restricted, ConvexMixture)
                .unwrap()
                .dim(),
            3072
        );
        assert_eq!(
            witness_space(SettingFamily::Full, ExtendedControl)
                .unwrap()
                .dim(),
            1024
        );
        assert_eq!(
            witness_space(SettingFamily::Restricted, ExtendedControl)
                .unwrap()
                .dim(),
            768
        );
    }

    #[test]
    fn separable_mixture_has_zero_white_robustness() {
        let layout = SystemLayout::simplified_switch();
        let ab = comb_process(CausalOrder::AThenB, &layout).unwrap();
        let ba = comb_process(CausalOrder::BThenA, &layout).unwrap();
        let w = ProcessMatrix::mixture(&[(0.5, &ab), (0.5, &ba)]).unwrap();
        let opts = SolverSettings::default().with_tolerance(1e-7);
        let r = robustness(
            &w,
            SettingFamily::Full,
            NoiseType::WhiteNoise,
            SeparabilityDefinition::ConvexMixture,
            &opts,
        )
        .unwrap();
        assert!(r.r < 1e-5, "r = {}", r.r);
    }

    #[test]
    fn switch_white_noise_witness() {
        let w = switch_simplified(CONTROL_Y_MINUS).unwrap();
        let opts = SolverSettings::default().with_tolerance(1e-7);
        let g = optimal_witness(
            &w,
            SettingFamily::Full,
            NoiseType::WhiteNoise,
            SeparabilityDefinition::ConvexMixture,
            &opts,
        )
        .unwrap();
        let v = evaluate_witness(&g, &w).unwrap();
        assert!((v + 2.76699).abs() < 2e-3, "value {v}");
        assert!(g.alpha_residual() < 1e-8);
        assert!((g.scaled(2.0).evaluate(&w).unwrap() - 2.0 * v).abs() < 1e-9);
    }
}
