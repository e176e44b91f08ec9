//! On-disk formats: matrix JSON, count/probability CSV, witness and
//! result JSON, worst-case CSV and conic program dumps.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hoptomo_core::causal::{
    NoiseType, RobustnessResult, SeparabilityDefinition, SolverReport, Witness,
};
use hoptomo_core::conic::{Cone, ConicProgram, Sense};
use hoptomo_core::procmat::ProcessMatrix;
use hoptomo_core::qsys::{ComplexMatrix, Label, SystemLayout, C64};
use hoptomo_core::recon::{ReconstructionResult, WorstCaseSweep};
use hoptomo_core::simlab::{CountTable, ProbabilityTable};
use hoptomo_core::tomoset::{setting_operator, SettingFamily, SettingIndex};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub layout: Vec<(String, usize)>,
    /// Row-major real parts.
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixFile {
    pub fn from_matrix(m: &ComplexMatrix, layout: &SystemLayout) -> Self {
        Self {
            layout: layout
                .factors()
                .iter()
                .map(|(l, d)| (l.name().to_string(), *d))
                .collect(),
            re: m.data().iter().map(|z| z.re).collect(),
            im: m.data().iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_process(w: &ProcessMatrix) -> Self {
        Self::from_matrix(&w.matrix, &w.layout)
    }

    pub fn layout(&self) -> Result<SystemLayout, CliError> {
        let factors = self
            .layout
            .iter()
            .map(|(name, d)| Ok((Label::parse(name)?, *d)))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(SystemLayout::new(factors)?)
    }

    pub fn matrix(&self) -> Result<(ComplexMatrix, SystemLayout), CliError> {
        let layout = self.layout()?;
        let d = layout.dim();
        if self.re.len() != d * d || self.im.len() != d * d {
            return Err(CliError::validation(format!(
                "matrix file holds {} real and {} imaginary entries, layout needs {}",
                self.re.len(),
                self.im.len(),
                d * d
            )));
        }
        let data = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| C64::new(a, b))
            .collect();
        Ok((ComplexMatrix::new(d, d, data)?, layout))
    }

    /// Parses and validates a process matrix.
    pub fn process(&self) -> Result<ProcessMatrix, CliError> {
        let (m, layout) = self.matrix()?;
        Ok(ProcessMatrix::new(m, layout)?)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::validation(format!("{what}: {e}")))
}

const TABLE_HEADER: [&str; 9] = ["a", "b", "c", "jA", "kA", "jB", "kB", "z", "w"];

/// Metadata carried in the `#` comment line that opens every table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableMeta {
    pub family: Option<SettingFamily>,
    pub entries: BTreeMap<String, String>,
}

impl TableMeta {
    pub fn new(family: SettingFamily) -> Self {
        Self {
            family: Some(family),
            entries: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    fn line(&self) -> String {
        let mut s = String::from("#");
        if let Some(f) = self.family {
            s.push_str(&format!(" family={}", f.name()));
        }
        for (k, v) in &self.entries {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }

    fn parse(line: &str) -> Result<Self, CliError> {
        let mut meta = TableMeta::default();
        for item in line.trim_start_matches('#').split_whitespace() {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                CliError::validation(format!("malformed table metadata `{item}`"))
            })?;
            if k == "family" {
                meta.family = Some(SettingFamily::parse(v)?);
            } else {
                meta.entries.insert(k.to_string(), v.to_string());
            }
        }
        Ok(meta)
    }
}

fn index_fields(idx: &SettingIndex) -> [u8; 9] {
    [
        idx.a, idx.b, idx.c, idx.ja, idx.ka, idx.jb, idx.kb, idx.z, idx.w,
    ]
}

fn write_table(
    out: &mut dyn Write,
    meta: &TableMeta,
    family: SettingFamily,
    column: &str,
    values: &[f64],
) -> Result<(), CliError> {
    writeln!(out, "{}", meta.line()).map_err(CliError::from_io)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = TABLE_HEADER.to_vec();
    header.push(column);
    w.write_record(&header).map_err(CliError::from_csv)?;
    for (idx, v) in family.settings().zip(values) {
        let mut rec: Vec<String> = index_fields(&idx).iter().map(|x| x.to_string()).collect();
        rec.push(format_value(*v));
        w.write_record(&rec).map_err(CliError::from_csv)?;
    }
    w.flush().map_err(CliError::from_io)
}

/// Shortest round-trip representation.
fn format_value(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

pub fn write_counts(out: &mut dyn Write, t: &CountTable, meta: TableMeta) -> Result<(), CliError> {
    let mut meta = meta;
    meta.family = Some(t.family);
    if let Some(s) = t.shots {
        meta = meta.with("shots", s);
    }
    if let Some(s) = t.seed {
        meta = meta.with("seed", s);
    }
    write_table(out, &meta, t.family, "count", &t.counts)
}

pub fn write_probabilities(
    out: &mut dyn Write,
    t: &ProbabilityTable,
    meta: TableMeta,
) -> Result<(), CliError> {
    let mut meta = meta;
    meta.family = Some(t.family);
    write_table(out, &meta, t.family, "p", &t.p)
}

#[derive(Clone, Debug)]
pub enum Table {
    Counts(CountTable),
    Probabilities(ProbabilityTable),
}

impl Table {
    pub fn family(&self) -> SettingFamily {
        match self {
            Table::Counts(t) => t.family,
            Table::Probabilities(t) => t.family,
        }
    }
}

/// Reads a count or probability table; the value column decides which.
pub fn read_table(input: &mut dyn Read) -> Result<(Table, TableMeta), CliError> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(CliError::from_io)?;
    if !first.starts_with('#') {
        return Err(CliError::validation(
            "table lacks its `# family=…` metadata line",
        ));
    }
    let meta = TableMeta::parse(first.trim())?;
    let family = meta
        .family
        .ok_or_else(|| CliError::validation("table metadata names no family"))?;

    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r
        .headers()
        .map_err(CliError::from_csv)?
        .iter()
        .map(String::from)
        .collect();
    if header.len() != 10 || header[..9] != TABLE_HEADER {
        return Err(CliError::validation(format!(
            "unexpected table columns {header:?}"
        )));
    }
    let column = header[9].clone();
    if column != "count" && column != "p" {
        return Err(CliError::validation(format!(
            "unknown value column `{column}`"
        )));
    }
    let mut values = vec![f64::NAN; family.count()];
    let mut seen = 0usize;
    for rec in r.records() {
        let rec = rec.map_err(CliError::from_csv)?;
        let f: Vec<u8> = rec
            .iter()
            .take(9)
            .map(|s| {
                s.parse::<u8>()
                    .map_err(|_| CliError::validation(format!("bad index field `{s}`")))
            })
            .collect::<Result<_, _>>()?;
        let idx = SettingIndex {
            a: f[0],
            b: f[1],
            c: f[2],
            ja: f[3],
            ka: f[4],
            jb: f[5],
            kb: f[6],
            z: f[7],
            w: f[8],
        };
        let pos = idx.position(family)?;
        let v: f64 = rec[9]
            .parse()
            .map_err(|_| CliError::validation(format!("bad value `{}`", &rec[9])))?;
        if !values[pos].is_nan() {
            return Err(CliError::validation(format!("duplicate row for {idx:?}")));
        }
        values[pos] = v;
        seen += 1;
    }
    if seen != family.count() {
        return Err(hoptomo_core::Error::IncompleteTable {
            expected: family.count(),
            found: seen,
        }
        .into());
    }
    let table = if column == "count" {
        let num = |k: &str| meta.entries.get(k).map(|s| s.parse::<u64>()).transpose();
        let shots = num("shots").map_err(|_| CliError::validation("bad `shots` metadata"))?;
        let seed = num("seed").map_err(|_| CliError::validation("bad `seed` metadata"))?;
        Table::Counts(CountTable::new(family, values, shots, seed)?)
    } else {
        Table::Probabilities(ProbabilityTable::new(family, values)?)
    };
    Ok((table, meta))
}

/// SHA-256 over the entries rounded to 1e-12, as little-endian `i64`
/// pairs (re, im), row-major.
pub fn operator_hash(m: &ComplexMatrix) -> String {
    let mut h = Sha256::new();
    for z in m.data() {
        for x in [z.re, z.im] {
            let q = (x * 1e12).round() as i64;
            h.update(q.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_settings(out: &mut dyn Write, family: SettingFamily) -> Result<(), CliError> {
    writeln!(out, "{}", TableMeta::new(family).line()).map_err(CliError::from_io)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = TABLE_HEADER.to_vec();
    header.push("sha256");
    w.write_record(&header).map_err(CliError::from_csv)?;
    for idx in family.settings() {
        let s = setting_operator(&idx, family)?;
        let mut rec: Vec<String> = index_fields(&idx).iter().map(|x| x.to_string()).collect();
        rec.push(operator_hash(&s));
        w.write_record(&rec).map_err(CliError::from_csv)?;
    }
    w.flush().map_err(CliError::from_io)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverFile {
    pub status: String,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl From<&SolverReport> for SolverFile {
    fn from(r: &SolverReport) -> Self {
        Self {
            status: r.status.name().to_string(),
            iterations: r.iterations,
            primal_residual: r.primal_residual,
            dual_residual: r.dual_residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessFile {
    pub family: String,
    pub noise: String,
    pub definition: String,
    /// `G = Σ α_k S_k` over the family's settings in table order.
    pub alpha: Vec<f64>,
    /// Matrix file holding `G`, relative to this file.
    #[serde(rename = "matrix-ref")]
    pub matrix_ref: Option<String>,
    /// `Tr(G·W)` on the process the witness was optimized for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverFile>,
}

impl WitnessFile {
    pub fn new(g: &Witness, matrix_ref: Option<String>) -> Self {
        Self {
            family: g.family.name().to_string(),
            noise: g.noise.name().to_string(),
            definition: g.definition.name().to_string(),
            alpha: g.alpha.clone(),
            matrix_ref,
            value: None,
            process: None,
            solver: g.solver.as_ref().map(SolverFile::from),
        }
    }

    pub fn witness(&self) -> Result<Witness, CliError> {
        let family = SettingFamily::parse(&self.family)?;
        let noise = NoiseType::parse(&self.noise)?;
        let definition = SeparabilityDefinition::parse(&self.definition)?;
        Ok(Witness::from_alpha(
            self.alpha.clone(),
            family,
            noise,
            definition,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessFile {
    pub family: String,
    pub noise: String,
    pub definition: String,
    pub process: String,
    pub robustness: f64,
    /// Largest coordinate deviation of `S_AB + S_BA` from `W + rΩ` on the
    /// witness space.
    pub certificate_residual: f64,
    /// `Tr S_AB` and `Tr S_BA`.
    pub weights: (f64, f64),
    pub solver: SolverFile,
}

impl RobustnessFile {
    pub fn new(r: &RobustnessResult, process: &str) -> Self {
        Self {
            family: r.family.name().to_string(),
            noise: r.noise.name().to_string(),
            definition: r.definition.name().to_string(),
            process: process.to_string(),
            robustness: r.r,
            certificate_residual: r.certificate_residual,
            weights: (r.s_ab.trace().re, r.s_ba.trace().re),
            solver: SolverFile::from(&r.solver),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionFile {
    pub family: String,
    pub future_x: bool,
    /// Mean absolute residual of the returned process.
    pub residual: f64,
    pub solver_objective: f64,
    pub stat_error: Option<f64>,
    #[serde(rename = "matrix-ref")]
    pub matrix_ref: String,
    /// Fidelity to the preset named in the table metadata, when known.
    pub source: Option<String>,
    pub fidelity_to_source: Option<f64>,
    pub solver: SolverFile,
}

impl ReconstructionFile {
    pub fn new(r: &ReconstructionResult, matrix_ref: String) -> Self {
        Self {
            family: r.family.name().to_string(),
            future_x: r.future_x,
            residual: r.residual,
            solver_objective: r.solver_objective,
            stat_error: None,
            matrix_ref,
            source: None,
            fidelity_to_source: None,
            solver: SolverFile::from(&r.solver),
        }
    }
}

/// `eps` then one column per witness; infeasible points are left empty.
pub fn write_sweep(
    out: &mut dyn Write,
    sweep: &WorstCaseSweep,
    names: &[String],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["eps".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(CliError::from_csv)?;
    for (k, eps) in sweep.eps.iter().enumerate() {
        let mut rec = vec![format!("{eps:?}")];
        for row in &sweep.values {
            rec.push(row[k].map(|v| format!("{v:?}")).unwrap_or_default());
        }
        w.write_record(&rec).map_err(CliError::from_csv)?;
    }
    w.flush().map_err(CliError::from_io)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramDump {
    pub sense: String,
    pub blocks: Vec<BlockDump>,
    /// Sparse objective `(variable, coefficient)`.
    pub objective: Vec<(usize, f64)>,
    /// `Σ a_j x_j = rhs`.
    pub constraints: Vec<ConstraintDump>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDump {
    pub name: String,
    pub cone: String,
    pub offset: usize,
    pub len: usize,
    /// Hermitian-basis layout of PSD blocks.
    pub layout: Option<Vec<(String, usize)>>,
    /// Radius of ℓ1-ball blocks.
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDump {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl ProgramDump {
    pub fn new(p: &ConicProgram) -> Self {
        Self {
            sense: match p.sense {
                Sense::Minimize => "minimize",
                Sense::Maximize => "maximize",
            }
            .to_string(),
            blocks: p
                .blocks
                .iter()
                .map(|b| BlockDump {
                    name: b.name.clone(),
                    cone: b.cone.name().to_string(),
                    offset: b.offset,
                    len: b.len,
                    layout: match &b.cone {
                        Cone::Psd(l) => Some(
                            l.factors()
                                .iter()
                                .map(|(x, d)| (x.name().to_string(), *d))
                                .collect(),
                        ),
                        _ => None,
                    },
                    radius: match b.cone {
                        Cone::L1Ball(r) => Some(r),
                        _ => None,
                    },
                })
                .collect(),
            objective: p
                .objective
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| (j, *c))
                .collect(),
            constraints: p
                .constraints
                .iter()
                .map(|c| ConstraintDump {
                    terms: c.terms.clone(),
                    rhs: c.rhs,
                })
                .collect(),
        }
    }
}
