//! Synthetic experiments: Born probabilities, finite-shot counts, waveplate
//! jitter, normalization and statistical error.
//!
//! Sampling uses ChaCha8 seeded from the run seed, with the stream set to the
//! group index, so every `(w, x, y, z)` group draws from its own substream.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};

use crate::error::{Error, Result};
use crate::procmat::ProcessMatrix;
use crate::qsys::{c, ComplexMatrix, CoordMap, Label, SystemLayout, C64};
use crate::tomoset::{ket, BornMatrix, Fixtures, SettingFamily, SettingIndex};

pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Counts `C(abc|xyzw)` in family order. Sampled tables hold integers;
/// analytic tables hold expected counts.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable {
    pub family: SettingFamily,
    pub counts: Vec<f64>,
    /// Shots per configuration; `None` for analytic tables.
    pub shots: Option<u64>,
    pub seed: Option<u64>,
}

impl CountTable {
    pub fn new(
        family: SettingFamily,
        counts: Vec<f64>,
        shots: Option<u64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if counts.len() != family.count() {
            return Err(Error::IncompleteTable {
                expected: family.count(),
                found: counts.len(),
            });
        }
        if let Some(x) = counts.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Invalid(format!(
                "count {x} is not a nonnegative number"
            )));
        }
        Ok(Self {
            family,
            counts,
            shots,
            seed,
        })
    }

    /// `N_{xyzw}` per group.
    pub fn group_totals(&self) -> Vec<f64> {
        self.counts.chunks(8).map(|g| g.iter().sum()).collect()
    }

    pub fn get(&self, idx: &SettingIndex) -> Result<f64> {
        Ok(self.counts[idx.position(self.family)?])
    }
}

/// `p_exp(abc|xyzw)` in family order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    pub family: SettingFamily,
    pub p: Vec<f64>,
}

impl ProbabilityTable {
    /// Checks range and per-group normalization.
    pub fn new(family: SettingFamily, p: Vec<f64>) -> Result<Self> {
        let t = Self::new_unchecked(family, p)?;
        if let Some(x) = t.p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Invalid(format!("probability {x} outside [0, 1]")));
        }
        for (g, chunk) in t.p.chunks(8).enumerate() {
            let s: f64 = chunk.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL * 8.0 {
                return Err(Error::Invalid(format!("group {g} sums to {s}")));
            }
        }
        Ok(t)
    }

    /// Only the length is checked.
    pub fn new_unchecked(family: SettingFamily, p: Vec<f64>) -> Result<Self> {
        if p.len() != family.count() {
            return Err(Error::IncompleteTable {
                expected: family.count(),
                found: p.len(),
            });
        }
        Ok(Self { family, p })
    }

    pub fn get(&self, idx: &SettingIndex) -> Result<f64> {
        Ok(self.p[idx.position(self.family)?])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    /// Shots per configuration; `None` samples nothing (infinite shots).
    pub shots: Option<u64>,
    /// Standard deviation of every waveplate angle, degrees.
    pub jitter_deg: Option<f64>,
    /// Interferometer visibility `v²`.
    pub visibility2: Option<f64>,
}

impl NoiseModel {
    pub fn analytic() -> Self {
        Self {
            shots: None,
            jitter_deg: None,
            visibility2: None,
        }
    }

    pub fn with_shots(shots: u64) -> Self {
        Self {
            shots: Some(shots),
            jitter_deg: None,
            visibility2: None,
        }
    }

    pub fn jitter(mut self, deg: f64) -> Self {
        self.jitter_deg = Some(deg);
        self
    }

    pub fn visibility(mut self, v2: f64) -> Self {
        self.visibility2 = Some(v2);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == Some(0) {
            return Err(Error::Invalid("shots must be at least 1".into()));
        }
        if let Some(s) = self.jitter_deg {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::Invalid(format!(
                    "jitter {s} must be a nonnegative angle"
                )));
            }
        }
        if let Some(v) = self.visibility2 {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invalid(format!("visibility {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Quarter-wave plate with fast axis at `deg`.
pub fn qwp(deg: f64) -> ComplexMatrix {
    let t = deg.to_radians();
    let (s, co) = t.sin_cos();
    let off = c(s * co, s * co);
    ComplexMatrix::new(2, 2, vec![c(co * co, -s * s), off, off, c(s * s, -co * co)]).expect("2x2")
}

/// Half-wave plate with fast axis at `deg`.
pub fn hwp(deg: f64) -> ComplexMatrix {
    let t = 2.0 * deg.to_radians();
    let (s, co) = t.sin_cos();
    ComplexMatrix::new(2, 2, vec![c(co, 0.0), c(s, 0.0), c(s, 0.0), c(-co, 0.0)]).expect("2x2")
}

const H_POL: [C64; 2] = [c(1.0, 0.0), c(0.0, 0.0)];

/// State prepared from `|H⟩` by a QWP then a HWP.
pub fn prepared_state(qwp_deg: f64, hwp_deg: f64) -> [C64; 2] {
    let v = hwp(hwp_deg).apply(&qwp(qwp_deg).apply(&H_POL));
    [v[0], v[1]]
}

/// State projected on by a HWP then a QWP in front of an `|H⟩` analyzer.
pub fn measured_state(qwp_deg: f64, hwp_deg: f64) -> [C64; 2] {
    let v = qwp(qwp_deg).adjoint().apply(&hwp(hwp_deg).apply(&H_POL));
    [v[0], v[1]]
}

/// `(state, QWP, HWP)` angles of the past preparation.
pub const PAST_ANGLES: [(&str, f64, f64); 4] = [
    ("0", 0.0, 0.0),
    ("1", 0.0, -45.0),
    ("-", 0.0, -22.5),
    ("y+", -45.0, 0.0),
];
/// `(state, QWP, HWP)` angles of the party projections.
pub const MEASUREMENT_ANGLES: [(&str, f64, f64); 6] = [
    ("0", 0.0, 0.0),
    ("1", 0.0, 45.0),
    ("+", 45.0, 22.5),
    ("-", 45.0, 67.5),
    ("y-", 45.0, 0.0),
    ("y+", 45.0, 45.0),
];
/// `(state, QWP, HWP)` angles of the repreparations.
pub const REPREPARATION_ANGLES: [(&str, f64, f64); 4] = [
    ("0", 0.0, 0.0),
    ("1", 0.0, 45.0),
    ("+", 0.0, 22.5),
    ("y-", 45.0, 0.0),
];

fn lookup(tables: &[&[(&str, f64, f64)]], name: &str) -> Result<(f64, f64)> {
    tables
        .iter()
        .flat_map(|t| t.iter())
        .find(|e| e.0 == name)
        .map(|e| (e.1, e.2))
        .ok_or_else(|| Error::Invalid(format!("no waveplate setting for state `{name}`")))
}

fn projector(v: [C64; 2]) -> ComplexMatrix {
    ComplexMatrix::outer(&v)
}

/// Names of the local states behind each fixture of a family.
struct Names {
    past: [&'static str; 4],
    effects: [[&'static str; 2]; 3],
    repreps: [&'static str; 4],
}

fn names(family: SettingFamily) -> Names {
    match family {
        SettingFamily::Full => Names {
            past: ["0", "1", "+", "y+"],
            effects: [["0", "1"], ["+", "-"], ["y+", "y-"]],
            repreps: ["0", "1", "+", "y+"],
        },
        SettingFamily::Restricted => Names {
            past: ["0", "1", "-", "y+"],
            effects: [["0", "1"], ["+", "-"], ["y-", "y+"]],
            repreps: ["0", "1", "+", "y-"],
        },
    }
}

struct Locals {
    one: CoordMap,
}

impl Locals {
    fn new() -> Self {
        Self {
            one: CoordMap::new(&SystemLayout::new(vec![(Label::Pt, 2)]).expect("one qubit")),
        }
    }

    fn coords(&self, m: &ComplexMatrix) -> [f64; 4] {
        let v = self.one.to_coords(m);
        [v[0], v[1], v[2], v[3]]
    }

    /// Coordinates of `M ⊗ ψ^T` over `(in, out)`.
    fn party(&self, effect: &ComplexMatrix, reprep: &ComplexMatrix) -> [f64; 16] {
        let a = self.coords(effect);
        let b = self.coords(&reprep.transpose());
        let mut out = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                out[i * 4 + j] = a[i] * b[j];
            }
        }
        out
    }
}

/// The eight outcome probabilities of one group, ordered `(a, b, c)`.
fn group_probabilities(
    w: &[f64],
    past: &[f64; 4],
    a: &[[f64; 16]; 2],
    b: &[[f64; 16]; 2],
    f: &[[f64; 4]; 2],
) -> [f64; 8] {
    let mut t1 = [0.0; 1024];
    for (mu, &x) in past.iter().enumerate() {
        for j in 0..1024 {
            t1[j] += x * w[mu * 1024 + j];
        }
    }
    let mut out = [0.0; 8];
    for (ia, av) in a.iter().enumerate() {
        let mut t2 = [0.0; 64];
        for (nu, &x) in av.iter().enumerate() {
            for k in 0..64 {
                t2[k] += x * t1[nu * 64 + k];
            }
        }
        for (ib, bv) in b.iter().enumerate() {
            let mut t3 = [0.0; 4];
            for (nu, &x) in bv.iter().enumerate() {
                for l in 0..4 {
                    t3[l] += x * t2[nu * 4 + l];
                }
            }
            for (ic, fv) in f.iter().enumerate() {
                out[(ia * 2 + ib) * 2 + ic] = fv.iter().zip(&t3).map(|(x, y)| x * y).sum();
            }
        }
    }
    out
}

fn dephase(m: &ComplexMatrix, v: f64) -> ComplexMatrix {
    let mut out = m.clone();
    out[(0, 1)] *= v;
    out[(1, 0)] *= v;
    out
}

/// Exact Born probabilities of every setting of `family`.
pub fn exact_probabilities(w: &ProcessMatrix, family: SettingFamily) -> Result<ProbabilityTable> {
    if w.layout != SystemLayout::simplified_switch() {
        return Err(Error::UnsupportedLayout(format!("{}", w.layout)));
    }
    let p = BornMatrix::new(family).apply(&w.coords());
    ProbabilityTable::new(family, clip_groups(p))
}

/// Clips tiny negatives and renormalizes each group of eight.
fn clip_groups(mut p: Vec<f64>) -> Vec<f64> {
    for g in p.chunks_mut(8) {
        g.iter_mut().for_each(|x| *x = x.max(0.0));
        let s: f64 = g.iter().sum();
        if s > 0.0 {
            g.iter_mut().for_each(|x| *x /= s);
        }
    }
    p
}

fn multinomial(n: u64, p: &[f64; 8], rng: &mut ChaCha8Rng) -> [f64; 8] {
    let mut out = [0.0; 8];
    let mut left = n;
    let mut mass = 1.0;
    for k in 0..7 {
        if left == 0 {
            break;
        }
        let q = if mass > 0.0 {
            (p[k] / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let x = Binomial::new(left, q)
            .expect("probability in [0, 1]")
            .sample(rng);
        out[k] = x as f64;
        left -= x;
        mass -= p[k];
    }
    out[7] = left as f64;
    out
}

/// Simulated counts for every setting of `family`.
///
/// A configuration fixes `(w, x, y, z, a, b)` and reads both future outcomes,
/// so each group of eight outcomes receives `4·shots` events. With jitter,
/// the past waveplates are perturbed once per group, each party's projection
/// waveplates once per outcome and its repreparation once per group; the
/// perturbed probabilities are renormalized per group before sampling. The
/// future readout has no waveplates. Visibility scales the off-diagonal part
/// of the future effects by `v`.
pub fn simulate_counts(
    w: &ProcessMatrix,
    family: SettingFamily,
    noise: &NoiseModel,
    seed: u64,
) -> Result<CountTable> {
    noise.validate()?;
    if w.layout != SystemLayout::simplified_switch() {
        return Err(Error::UnsupportedLayout(format!("{}", w.layout)));
    }
    w.validate()?;
    let wc = w.coords();
    let loc = Locals::new();
    let nm = names(family);
    let fx = Fixtures::new(family);
    let v = noise.visibility2.map(|v2| v2.sqrt()).unwrap_or(1.0);
    let future: Vec<[[f64; 4]; 2]> = fx
        .future
        .iter()
        .map(|pair| {
            [
                loc.coords(&dephase(&pair[0], v)),
                loc.coords(&dephase(&pair[1], v)),
            ]
        })
        .collect();
    let sigma = noise.jitter_deg.unwrap_or(0.0);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Invalid(format!("{e}")))?;
    let per_group = noise.shots.map(|s| 4 * s);

    let mut counts = Vec::with_capacity(family.count());
    let mut group = 0u64;
    for wi in 0..4 {
        for ja in 0..3 {
            for ka in 0..4 {
                for jb in 0..3 {
                    for kb in 0..4 {
                        for z in 0..family.z_count() as usize {
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            rng.set_stream(group);
                            let mut jit = || {
                                if sigma > 0.0 {
                                    normal.sample(&mut rng)
                                } else {
                                    0.0
                                }
                            };
                            let past = {
                                let (q, h) =
                                    lookup(&[&PAST_ANGLES, &REPREPARATION_ANGLES], nm.past[wi])?;
                                projector(prepared_state(q + jit(), h + jit())).transpose()
                            };
                            let mut party = |j: usize, k: usize| -> Result<[[f64; 16]; 2]> {
                                let mut effects = Vec::with_capacity(2);
                                for name in nm.effects[j] {
                                    let (q, h) = lookup(&[&MEASUREMENT_ANGLES], name)?;
                                    effects.push(projector(measured_state(q + jit(), h + jit())));
                                }
                                let (q, h) =
                                    lookup(&[&REPREPARATION_ANGLES, &PAST_ANGLES], nm.repreps[k])?;
                                let rep = projector(prepared_state(q + jit(), h + jit()));
                                Ok([loc.party(&effects[0], &rep), loc.party(&effects[1], &rep)])
                            };
                            let a = party(ja, ka)?;
                            let b = party(jb, kb)?;
                            let p =
                                group_probabilities(&wc, &loc.coords(&past), &a, &b, &future[z]);
                            let p: [f64; 8] =
                                clip_groups(p.to_vec()).try_into().expect("eight outcomes");
                            if p.iter().sum::<f64>() == 0.0 {
                                return Err(Error::Numerical(format!(
                                    "group {group} has no probability mass"
                                )));
                            }
                            match per_group {
                                Some(n) => counts.extend(multinomial(n, &p, &mut rng)),
                                None => counts.extend(p),
                            }
                            group += 1;
                        }
                    }
                }
            }
        }
    }
    CountTable::new(family, counts, noise.shots, per_group.map(|_| seed))
}

/// `p = C / N_{xyzw}` per group.
pub fn normalize(counts: &CountTable) -> Result<ProbabilityTable> {
    let mut p = Vec::with_capacity(counts.counts.len());
    for (g, chunk) in counts.counts.chunks(8).enumerate() {
        let n: f64 = chunk.iter().sum();
        if n <= 0.0 {
            return Err(Error::EmptyGroup { group: g });
        }
        p.extend(chunk.iter().map(|x| x / n));
    }
    ProbabilityTable::new(counts.family, p)
}

/// Statistical error of a normalized table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatError {
    /// Mean over settings of `p(1−p)/√N`.
    pub eta: f64,
    /// Mean over settings of the binomial standard error `√(p(1−p)/N)`.
    pub binomial: f64,
}

/// Both error estimates; zero for analytic tables.
pub fn stat_error(p: &ProbabilityTable, counts: &CountTable) -> Result<StatError> {
    if p.family != counts.family {
        return Err(Error::FamilyMismatch {
            expected: counts.family.name(),
            found: p.family.name(),
        });
    }
    if counts.shots.is_none() {
        return Ok(StatError {
            eta: 0.0,
            binomial: 0.0,
        });
    }
    let totals = counts.group_totals();
    let (mut eta, mut bin) = (0.0, 0.0);
    for (k, &x) in p.p.iter().enumerate() {
        let n = totals[k / 8];
        if n <= 0.0 {
            return Err(Error::EmptyGroup { group: k / 8 });
        }
        let var = x * (1.0 - x);
        eta += var / n.sqrt();
        bin += (var / n).sqrt();
    }
    let m = p.p.len() as f64;
    Ok(StatError {
        eta: eta / m,
        binomial: bin / m,
    })
}

/// Whether a ket matches a named state up to global phase.
pub fn same_ray(v: [C64; 2], name: &str) -> Result<bool> {
    let t = ket(name)?;
    let ip = t[0].conj() * v[0] + t[1].conj() * v[1];
    Ok((ip.norm() - 1.0).abs() < 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procmat::{switch_simplified, white_noise_process, CONTROL_Y_MINUS};

    #[test]
    fn waveplate_tables_prepare_their_states() {
        for (name, q, h) in PAST_ANGLES.iter().chain(&REPREPARATION_ANGLES) {
            assert!(
                same_ray(prepared_state(*q, *h), name).unwrap(),
                "prepared {name}"
            );
        }
        for (name, q, h) in MEASUREMENT_ANGLES {
            assert!(
                same_ray(measured_state(q, h), name).unwrap(),
                "measured {name}"
            );
        }
    }

    #[test]
    fn analytic_mode_is_the_born_rule() {
        let w = switch_simplified(CONTROL_Y_MINUS).unwrap();
        for family in [SettingFamily::Full, SettingFamily::Restricted] {
            let exact = exact_probabilities(&w, family).unwrap();
            let sim = normalize(&simulate_counts(&w, family, &NoiseModel::analytic(), 1).unwrap())
                .unwrap();
            let dev = exact
                .p
                .iter()
                .zip(&sim.p)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12, "{family}: {dev}");
        }
    }

    #[test]
    fn sampling_is_deterministic_and_preserves_totals() {
        let w = switch_simplified(CONTROL_Y_MINUS).unwrap();
        let noise = NoiseModel::with_shots(100).jitter(1.0);
        let a = simulate_counts(&w, SettingFamily::Restricted, &noise, 7).unwrap();
        let b = simulate_counts(&w, SettingFamily::Restricted, &noise, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.group_totals().iter().all(|&n| n == 400.0));
        let c = simulate_counts(&w, SettingFamily::Restricted, &noise, 8).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn normalize_examples() {
        let mut counts = vec![0.0; SettingFamily::Restricted.count()];
        counts[0] = 5.0;
        for x in counts[8..].iter_mut() {
            *x = 3.0;
        }
        let t = CountTable::new(SettingFamily::Restricted, counts.clone(), Some(10), None).unwrap();
        let p = normalize(&t).unwrap();
        assert_eq!(p.p[0], 1.0);
        assert!((p.p[9] - 0.125).abs() < 1e-15);
        counts[0] = 0.0;
        let t = CountTable::new(SettingFamily::Restricted, counts, Some(10), None).unwrap();
        assert!(matches!(normalize(&t), Err(Error::EmptyGroup { group: 0 })));
    }

    #[test]
    fn deterministic_outcomes_have_no_error() {
        let family = SettingFamily::Restricted;
        let p: Vec<f64> = (0..family.count())
            .map(|k| if k % 8 == 0 { 1.0 } else { 0.0 })
            .collect();
        let t = ProbabilityTable::new(family, p.clone()).unwrap();
        let counts = CountTable::new(
            family,
            p.iter().map(|x| x * 100.0).collect(),
            Some(25),
            None,
        )
        .unwrap();
        let e = stat_error(&t, &counts).unwrap();
        assert_eq!(e.eta, 0.0);
        assert_eq!(e.binomial, 0.0);
    }

    #[test]
    fn visibility_only_touches_coherences() {
        let w = white_noise_process(&SystemLayout::simplified_switch()).unwrap();
        let noise = NoiseModel::analytic().visibility(0.5);
        let p = normalize(&simulate_counts(&w, SettingFamily::Full, &noise, 0).unwrap()).unwrap();
        assert!(p.p.iter().all(|x| (x - 0.125).abs() < 1e-12));
    }
}
