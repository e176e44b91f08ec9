//! Process reconstruction by least absolute residuals, and worst-case
//! tomography.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::causal::{SolverReport, Witness};
use crate::conic::{
    l1_epigraph, solve, BlockId, ConicProgram, L1Epigraph, ProgramBuilder, SolveStatus,
    SolverSettings,
};
use crate::error::{Error, Result};
use crate::procmat::{validity_projector, ProcessMatrix};
use crate::qsys::{herm_eig, CoordMap, Label, SystemLayout};
use crate::simlab::ProbabilityTable;
use crate::tomoset::{BornMatrix, SettingFamily};

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub process: ProcessMatrix,
    /// Mean absolute residual of `process`.
    pub residual: f64,
    /// Optimal value reported by the solver, before post-processing.
    pub solver_objective: f64,
    pub family: SettingFamily,
    pub future_x: bool,
    pub solver: SolverReport,
}

/// Mean over settings of `|p − Tr(W·S)|`.
pub fn residual(w: &ProcessMatrix, p: &ProbabilityTable) -> Result<f64> {
    if w.layout != SystemLayout::simplified_switch() {
        return Err(Error::UnsupportedLayout(format!("{}", w.layout)));
    }
    let born = BornMatrix::new(p.family).apply(&w.coords());
    Ok(born
        .iter()
        .zip(&p.p)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / p.p.len() as f64)
}

/// Coordinate of `1 ⊗ X` on the future control.
fn future_x_index(map: &CoordMap) -> Result<usize> {
    let pos = map.layout().position(Label::Fc)?;
    let mut digits = vec![0; map.layout().len()];
    digits[pos] = 1;
    Ok(map.index_of(&digits))
}

struct Fit {
    program: ConicProgram,
    w: BlockId,
}

/// A valid process block: zero outside the valid span, unit
/// normalization and optionally no weight on `1 ⊗ X_F`.
fn valid_process(b: &mut ProgramBuilder, future_x: bool) -> Result<BlockId> {
    let layout = SystemLayout::simplified_switch();
    let map = CoordMap::new(&layout);
    let valid = validity_projector(&layout)?;
    let w = b.psd("w", &layout)?;
    for j in valid.subspace.complement_indices() {
        b.constrain(vec![(b.var(w, j), 1.0)], 0.0)?;
    }
    // Tr W = d_P·d_Aout·d_Bout is coordinate 0 equal to one
    b.constrain(vec![(b.var(w, 0), 1.0)], valid.offset[0])?;
    if future_x {
        b.constrain(vec![(b.var(w, future_x_index(&map)?), 1.0)], 0.0)?;
    }
    Ok(w)
}

/// Rows `Born·w − residual_k = p_k`.
fn born_rows(
    b: &mut ProgramBuilder,
    w: BlockId,
    p: &ProbabilityTable,
    residual: impl Fn(&ProgramBuilder, usize) -> Vec<(usize, f64)>,
) -> Result<()> {
    let born = BornMatrix::new(p.family);
    for (k, &pk) in p.p.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = born
            .row_sparse(k)
            .into_iter()
            .map(|(j, x)| (b.var(w, j), x))
            .collect();
        terms.extend(residual(b, k));
        b.constrain(terms, pk)?;
    }
    Ok(())
}

/// `Born·w − (u − v) = p` over a valid `w`.
fn fit_program(
    p: &ProbabilityTable,
    future_x: bool,
) -> Result<(ProgramBuilder, BlockId, L1Epigraph)> {
    let mut b = ProgramBuilder::new();
    let w = valid_process(&mut b, future_x)?;
    let l1 = l1_epigraph(&mut b, "r", p.p.len())?;
    born_rows(&mut b, w, p, |b, k| l1.residual_terms(b, k).to_vec())?;
    Ok((b, w, l1))
}

/// The conic program solved by [`reconstruct`]: minimize the mean of
/// `u + v` subject to the fit constraints.
pub fn reconstruction_program(p: &ProbabilityTable, future_x: bool) -> Result<ConicProgram> {
    Ok(fit_reconstruction(p, future_x)?.program)
}

fn fit_reconstruction(p: &ProbabilityTable, future_x: bool) -> Result<Fit> {
    let (mut b, w, l1) = fit_program(p, future_x)?;
    let weight = 1.0 / p.p.len() as f64;
    for (j, c) in l1.sum_terms(&b, weight) {
        b.add_objective(j, c);
    }
    Ok(Fit {
        program: b.build(),
        w,
    })
}

/// Nearest valid process: alternates between the valid affine span (with the
/// optional future-X condition) and the PSD cone.
fn clean(coords: &[f64], future_x: bool) -> Result<ProcessMatrix> {
    let layout = SystemLayout::simplified_switch();
    let map = CoordMap::new(&layout);
    let valid = validity_projector(&layout)?;
    let fx = future_x_index(&map)?;
    let affine = |c: &[f64]| {
        let mut v = valid.project(c);
        v[0] = valid.offset[0];
        if future_x {
            v[fx] = 0.0;
        }
        v
    };
    let mut c = affine(coords);
    for _ in 0..50 {
        let m = map.from_coords(&c);
        let e = herm_eig(&m)?;
        if e.values[0] >= -1e-12 * valid.offset[0] {
            break;
        }
        let psd = e.reconstruct(|x| x.max(0.0));
        let mut pc = map.to_coords(&psd);
        let t = pc[0];
        if t <= 0.0 {
            return Err(Error::NonPositiveTrace(t));
        }
        pc.iter_mut().for_each(|x| *x *= valid.offset[0] / t);
        c = affine(&pc);
    }
    ProcessMatrix::from_coords(&c, &layout)
}

fn report(sol: &crate::conic::Solution) -> SolverReport {
    SolverReport {
        status: sol.status,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
    }
}

/// `W` minimizing the mean absolute residual over valid processes.
pub fn reconstruct(
    p: &ProbabilityTable,
    future_x: bool,
    settings: &SolverSettings,
) -> Result<ReconstructionResult> {
    let fit = fit_reconstruction(p, future_x)?;
    let sol = solve(&fit.program, settings)?.require_solved()?;
    let process = clean(sol.block(&fit.program, fit.w), future_x)?;
    let r = residual(&process, p)?;
    Ok(ReconstructionResult {
        process,
        residual: r,
        solver_objective: sol.objective,
        family: p.family,
        future_x,
        solver: report(&sol),
    })
}

#[derive(Clone, Debug)]
pub enum WorstCase {
    Feasible {
        process: ProcessMatrix,
        /// `Tr(G·W)` of the maximizer.
        value: f64,
        residual: f64,
        solver: SolverReport,
    },
    Infeasible {
        reason: String,
    },
}

impl WorstCase {
    pub fn value(&self) -> Option<f64> {
        match self {
            WorstCase::Feasible { value, .. } => Some(*value),
            WorstCase::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, WorstCase::Feasible { .. })
    }
}

#[derive(Clone, Debug, Default)]
pub struct WorstCaseOptions {
    pub future_x: bool,
    /// Reconstruction of the same table with the same `future_x`; computed when absent.
    /// Its residual bounds the attainable one: smaller `ε` is infeasible, and at `ε`
    /// within `NEAR_MARGIN` of it the feasible set collapses onto the reconstruction.
    pub reference: Option<ReconstructionResult>,
    pub settings: SolverSettings,
}

/// Relative slack below the reference residual before `ε` counts as infeasible.
const RESIDUAL_MARGIN: f64 = 1e-6;
/// Relative band above the reference residual answered by the reference itself.
const NEAR_MARGIN: f64 = 1e-3;

/// Maximizes `Tr(G·W)` over valid `W` with mean absolute residual at most `ε`.
pub fn worst_case(
    p: &ProbabilityTable,
    g: &Witness,
    eps: f64,
    opts: &WorstCaseOptions,
) -> Result<WorstCase> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Invalid(format!(
            "ε = {eps} must be a nonnegative number"
        )));
    }
    if g.family != p.family {
        return Err(Error::FamilyMismatch {
            expected: p.family.name(),
            found: g.family.name(),
        });
    }
    let computed;
    let reference = match &opts.reference {
        Some(r) if r.family != p.family || r.future_x != opts.future_x => {
            return Err(Error::Invalid(
                "reference reconstruction does not match the table or future_x".into(),
            ));
        }
        Some(r) => r,
        None => {
            computed = reconstruct(p, opts.future_x, &opts.settings)?;
            &computed
        }
    };
    let r = reference.residual;
    if eps < r * (1.0 - RESIDUAL_MARGIN) {
        return Ok(WorstCase::Infeasible {
            reason: format!("ε = {eps} is below the attainable residual {r}"),
        });
    }
    if eps <= r * (1.0 + NEAR_MARGIN) {
        let value = g.evaluate(&reference.process)?;
        return Ok(WorstCase::Feasible {
            process: reference.process.clone(),
            value,
            residual: r,
            solver: reference.solver.clone(),
        });
    }
    // the residual vector lives in the ball ‖r‖₁ ≤ Nε
    let mut b = ProgramBuilder::new();
    let w = valid_process(&mut b, opts.future_x)?;
    let n = p.p.len();
    let r = b.l1_ball("r", n, eps * n as f64)?;
    born_rows(&mut b, w, p, |b, k| vec![(b.var(r, k), -1.0)])?;
    for (j, &x) in g.coords.iter().enumerate() {
        if x != 0.0 {
            b.add_objective(b.var(w, j), x);
        }
    }
    b.maximize();
    let program = b.build();
    let sol = solve(&program, &opts.settings)?;
    match sol.status {
        SolveStatus::Infeasible => Ok(WorstCase::Infeasible {
            reason: format!("no valid process within ε = {eps}"),
        }),
        SolveStatus::MaxIterations => Err(Error::Solver(format!(
            "worst case at ε = {eps} stopped after {} iterations (primal {:.2e}, dual {:.2e})",
            sol.iterations, sol.primal_residual, sol.dual_residual
        ))),
        SolveStatus::Solved => {
            let process = clean(sol.block(&program, w), opts.future_x)?;
            let value = g.evaluate(&process)?;
            let residual = residual(&process, p)?;
            Ok(WorstCase::Feasible {
                process,
                value,
                residual,
                solver: report(&sol),
            })
        }
    }
}

/// Worst-case witness values over an `ε` grid, one curve per witness.
#[derive(Clone, Debug)]
pub struct WorstCaseSweep {
    pub eps: Vec<f64>,
    /// `values[i][k]`: witness `i` at `eps[k]`, `None` when infeasible.
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn sweep_worst_case(
    p: &ProbabilityTable,
    witnesses: &[Witness],
    grid: &[f64],
    opts: &WorstCaseOptions,
) -> Result<WorstCaseSweep> {
    let mut opts = opts.clone();
    if opts.reference.is_none() && !witnesses.is_empty() && !grid.is_empty() {
        opts.reference = Some(reconstruct(p, opts.future_x, &opts.settings)?);
    }
    let mut values = Vec::with_capacity(witnesses.len());
    for g in witnesses {
        let mut row = Vec::with_capacity(grid.len());
        for &eps in grid {
            row.push(worst_case(p, g, eps, &opts)?.value());
        }
        values.push(row);
    }
    Ok(WorstCaseSweep {
        eps: grid.to_vec(),
        values,
    })
}

/// `ε` from `start` to `end` inclusive in steps of `step`.
pub fn eps_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(end >= start) || start < 0.0 {
        return Err(Error::Invalid(format!("bad ε grid {start}:{end}:{step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// From the reconstruction residual to 0.015 in steps of 5e-4.
pub fn default_eps_grid(residual: f64) -> Vec<f64> {
    eps_grid(residual, residual.max(0.015), 5e-4).expect("valid grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procmat::{switch_simplified, white_noise_process, CONTROL_Y_MINUS};
    use crate::simlab::exact_probabilities;

    #[test]
    fn residual_examples() {
        let w = switch_simplified(CONTROL_Y_MINUS).unwrap();
        let p = exact_probabilities(&w, SettingFamily::Restricted).unwrap();
        assert!(residual(&w, &p).unwrap() < 1e-14);
        let shifted =
            ProbabilityTable::new_unchecked(p.family, p.p.iter().map(|x| x + 0.01).collect())
                .unwrap();
        assert!((residual(&w, &shifted).unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn grids() {
        let g = eps_grid(0.01, 0.015, 5e-4).unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 0.015).abs() < 1e-12);
        assert!(eps_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn clean_keeps_valid_processes() {
        let w = white_noise_process(&SystemLayout::simplified_switch()).unwrap();
        let c = clean(&w.coords(), true).unwrap();
        assert!(c.matrix.sub(&w.matrix).max_abs() < 1e-12);
    }
}
