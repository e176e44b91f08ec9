//! Fidelity, the commutation game and Monte Carlo error bars.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::causal::Witness;
use crate::conic::SolverSettings;
use crate::error::{Error, Result};
use crate::procmat::ProcessMatrix;
use crate::qsys::{c, herm_eig, ComplexMatrix, C64};
use crate::recon::reconstruct;
use crate::simlab::{normalize, simulate_counts, stat_error, NoiseModel};
use crate::tomoset::SettingFamily;

/// Eigenvalues below `-CLIP_TOL` (relative to the largest) are rejected.
pub const CLIP_TOL: f64 = 1e-10;

fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = herm_eig(m)?;
    let top = e.values.last().copied().unwrap_or(0.0).abs().max(1.0);
    if e.values[0] < -CLIP_TOL * top {
        return Err(Error::NotPsd {
            min_eig: e.values[0],
        });
    }
    Ok(e.reconstruct(|x| x.max(0.0).sqrt()))
}

fn normalized(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let t = m.trace().re;
    if !(t > 0.0) {
        return Err(Error::NonPositiveTrace(t));
    }
    Ok(m.scale(1.0 / t))
}

/// `Tr√(√σ ρ √σ)` of the trace-normalized matrices.
pub fn fidelity(w1: &ProcessMatrix, w2: &ProcessMatrix) -> Result<f64> {
    if w1.layout != w2.layout {
        return Err(Error::UnsupportedLayout(format!(
            "{} vs {}",
            w1.layout, w2.layout
        )));
    }
    matrix_fidelity(&w1.matrix, &w2.matrix)
}

/// [`fidelity`] on bare PSD matrices.
pub fn matrix_fidelity(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let rho = normalized(a)?;
    let sigma = normalized(b)?;
    let s = sqrt_psd(&sigma)?;
    let inner = s.matmul(&rho).matmul(&s).hermitian_part();
    let e = herm_eig(&inner)?;
    // rounding noise on the null space would otherwise add √ε per direction
    let floor = 1e-13 * e.values.last().copied().unwrap_or(0.0).abs();
    let f: f64 = e
        .values
        .iter()
        .filter(|&&x| x > floor)
        .map(|&x| x.sqrt())
        .sum();
    Ok(f.min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairClass {
    Commute,
    Anticommute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GamePair {
    pub ua: ComplexMatrix,
    pub ub: ComplexMatrix,
    pub class: PairClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    pub pairs: Vec<GamePair>,
    pub visibility2: f64,
    /// Target input state.
    pub psi: [C64; 2],
}

const BRACKET_TOL: f64 = 1e-12;

fn classify(a: &ComplexMatrix, b: &ComplexMatrix, index: usize) -> Result<PairClass> {
    let ab = a.matmul(b);
    let ba = b.matmul(a);
    let comm = ab.sub(&ba).max_abs() < BRACKET_TOL;
    let anti = ab.add(&ba).max_abs() < BRACKET_TOL;
    match (comm, anti) {
        (true, false) => Ok(PairClass::Commute),
        (false, true) => Ok(PairClass::Anticommute),
        _ => Err(Error::NoVanishingBracket { index }),
    }
}

impl GameSpec {
    /// Classifies each pair by which bracket vanishes.
    pub fn new(pairs: Vec<(ComplexMatrix, ComplexMatrix)>, visibility2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&visibility2) {
            return Err(Error::Invalid(format!(
                "visibility {visibility2} outside [0, 1]"
            )));
        }
        let pairs = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (ua, ub))| {
                let class = classify(&ua, &ub, i)?;
                Ok(GamePair { ua, ub, class })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pairs,
            visibility2,
            psi: [c(1.0, 0.0), c(0.0, 0.0)],
        })
    }

    /// The ten unordered pairs of `{I, X, Y, Z}`.
    pub fn pauli(visibility2: f64) -> Result<Self> {
        let p = paulis();
        let mut pairs = Vec::new();
        for i in 0..4 {
            for j in i..4 {
                pairs.push((p[i].clone(), p[j].clone()));
            }
        }
        Self::new(pairs, visibility2)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.pairs.iter().enumerate() {
            if classify(&p.ua, &p.ub, i)? != p.class {
                return Err(Error::Invalid(format!(
                    "pair {i} is not in its promised class"
                )));
            }
        }
        Ok(())
    }
}

pub fn paulis() -> [ComplexMatrix; 4] {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    let mk = |d: [C64; 4]| ComplexMatrix::new(2, 2, d.to_vec()).expect("2x2");
    [
        mk([o, z, z, o]),
        mk([z, o, o, z]),
        mk([z, -i, i, z]),
        mk([o, z, z, -o]),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameResult {
    /// Probability of the correct control outcome, per pair.
    pub per_pair: Vec<f64>,
    pub classes: Vec<PairClass>,
    /// Mean of the commuting-class and anticommuting-class averages.
    pub p_succ: f64,
}

/// Success probabilities of guessing the pair class from the control.
///
/// The control ends in `(|0⟩|BAψ⟩ + |1⟩|ABψ⟩)/√2`; with visibility its
/// coherence is scaled by `v`, so `p(±) = (1 ± v·Re⟨BAψ|ABψ⟩)/2`. Commuting
/// pairs are correct on `+`, anticommuting pairs on `−`.
pub fn game_success(spec: &GameSpec) -> Result<GameResult> {
    spec.validate()?;
    let v = spec.visibility2.sqrt();
    let mut per_pair = Vec::with_capacity(spec.pairs.len());
    let mut classes = Vec::with_capacity(spec.pairs.len());
    for p in &spec.pairs {
        let phi0 = p.ub.apply(&p.ua.apply(&spec.psi));
        let phi1 = p.ua.apply(&p.ub.apply(&spec.psi));
        let overlap: C64 = phi0.iter().zip(&phi1).map(|(a, b)| a.conj() * b).sum();
        let plus = 0.5 * (1.0 + v * overlap.re);
        per_pair.push(match p.class {
            PairClass::Commute => plus,
            PairClass::Anticommute => 1.0 - plus,
        });
        classes.push(p.class);
    }
    let mean = |k: PairClass| {
        let xs: Vec<f64> = per_pair
            .iter()
            .zip(&classes)
            .filter(|(_, c)| **c == k)
            .map(|(x, _)| *x)
            .collect();
        if xs.is_empty() {
            None
        } else {
            Some(xs.iter().sum::<f64>() / xs.len() as f64)
        }
    };
    let p_succ = match (mean(PairClass::Commute), mean(PairClass::Anticommute)) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Invalid("game without pairs".into())),
    };
    Ok(GameResult {
        per_pair,
        classes,
        p_succ,
    })
}

#[derive(Clone, Debug)]
pub struct MonteCarloConfig {
    pub process: ProcessMatrix,
    pub family: SettingFamily,
    pub noise: NoiseModel,
    pub future_x: bool,
    pub witnesses: Vec<Witness>,
    pub settings: SolverSettings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spread {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    pub fn new(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            values,
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloReport {
    pub seeds: Vec<u64>,
    pub fidelity: Spread,
    pub residual: Spread,
    pub eta: Spread,
    /// One spread per configured witness, evaluated on the reconstructions.
    pub witness: Vec<Spread>,
}

/// Seed of trial `t`, drawn from its own ChaCha8 stream.
pub fn trial_seed(seed: u64, t: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng.next_u64()
}

/// Repeats simulate → normalize → reconstruct → evaluate with fresh noise.
pub fn monte_carlo_errorbars(
    cfg: &MonteCarloConfig,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::Invalid("at least one trial is required".into()));
    }
    let mut seeds = Vec::with_capacity(trials);
    let (mut fid, mut res, mut eta) = (Vec::new(), Vec::new(), Vec::new());
    let mut wit: Vec<Vec<f64>> = cfg.witnesses.iter().map(|_| Vec::new()).collect();
    for t in 0..trials {
        let s = trial_seed(seed, t as u64);
        seeds.push(s);
        let counts = simulate_counts(&cfg.process, cfg.family, &cfg.noise, s)?;
        let p = normalize(&counts)?;
        let rec = reconstruct(&p, cfg.future_x, &cfg.settings)?;
        fid.push(fidelity(&rec.process, &cfg.process)?);
        res.push(rec.residual);
        eta.push(stat_error(&p, &counts)?.eta);
        for (g, out) in cfg.witnesses.iter().zip(wit.iter_mut()) {
            out.push(g.evaluate(&rec.process)?);
        }
    }
    Ok(MonteCarloReport {
        seeds,
        fidelity: Spread::new(fid),
        residual: Spread::new(res),
        eta: Spread::new(eta),
        witness: wit.into_iter().map(Spread::new).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choi::choi_of_unitary;
    use crate::procmat::{switch_full, switch_simplified, white_noise_process, CONTROL_Y_MINUS};
    use crate::qsys::{kron_all, SystemLayout};
    use alloc::vec;

    #[test]
    fn fidelity_basics() {
        let w = switch_simplified(CONTROL_Y_MINUS).unwrap();
        assert!((fidelity(&w, &w).unwrap() - 1.0).abs() < 1e-9);
        let n = white_noise_process(&SystemLayout::simplified_switch()).unwrap();
        let a = fidelity(&w, &n).unwrap();
        let b = fidelity(&n, &w).unwrap();
        assert!((a - b).abs() < 1e-9);
        // two equal eigenvalues against 1/64: F = 2·√(1/128)
        let spec = crate::qsys::eigvalsh(&w.matrix).unwrap();
        assert!((spec[63] - spec[62]).abs() < 1e-9 && spec[61].abs() < 1e-9);
        assert!((a - 2.0 * (1.0f64 / 128.0).sqrt()).abs() < 1e-9, "{a}");
    }

    #[test]
    fn pauli_game_is_perfect_at_full_visibility() {
        let r = game_success(&GameSpec::pauli(1.0).unwrap()).unwrap();
        assert_eq!(r.per_pair.len(), 10);
        assert!(r.per_pair.iter().all(|p| (p - 1.0).abs() < 1e-12));
        let r = game_success(&GameSpec::pauli(0.97).unwrap()).unwrap();
        assert!((r.p_succ - 0.5 * (1.0 + 0.97f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn pairs_need_a_vanishing_bracket() {
        let p = paulis();
        let h = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0])
            .unwrap()
            .scale(1.0 / 2f64.sqrt());
        assert!(matches!(
            GameSpec::new(vec![(p[1].clone(), h)], 1.0),
            Err(Error::NoVanishingBracket { index: 0 })
        ));
    }

    #[test]
    fn game_matches_the_switch_process() {
        let w = switch_full().unwrap();
        let plus = ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let minus = ComplexMatrix::from_real(2, 2, &[0.5, -0.5, -0.5, 0.5]).unwrap();
        let zero = ComplexMatrix::diag(&[1.0, 0.0]);
        let spec = GameSpec::pauli(1.0).unwrap();
        let direct = game_success(&spec).unwrap();
        for (k, pair) in spec.pairs.iter().enumerate() {
            let ca = choi_of_unitary(&pair.ua).unwrap().matrix.transpose();
            let cb = choi_of_unitary(&pair.ub).unwrap().matrix.transpose();
            let effect = if pair.class == PairClass::Commute {
                &plus
            } else {
                &minus
            };
            let s = kron_all(&[&plus, &zero, &ca, &cb, &ComplexMatrix::identity(2), effect]);
            let prob = w.matrix.trace_product_re(&s);
            assert!(
                (prob - direct.per_pair[k]).abs() < 1e-12,
                "pair {k}: {prob}"
            );
        }
    }

    #[test]
    fn noiseless_monte_carlo_has_no_spread() {
        let w = switch_simplified(CONTROL_Y_MINUS).unwrap();
        let cfg = MonteCarloConfig {
            process: w,
            family: SettingFamily::Restricted,
            noise: NoiseModel::analytic(),
            future_x: true,
            witnesses: Vec::new(),
            settings: SolverSettings::default(),
        };
        let r = monte_carlo_errorbars(&cfg, 2, 5).unwrap();
        assert_eq!(r.fidelity.std, 0.0);
        assert!(r.fidelity.mean > 0.999);
    }
}
