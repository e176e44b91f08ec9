//! The `hoptomo` command line.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hoptomo_core::causal::{
    optimal_witness, robustness, NoiseType, SeparabilityDefinition, Witness,
};
use hoptomo_core::conic::SolverSettings;
use hoptomo_core::metrics::{
    fidelity, game_success, monte_carlo_errorbars, GameSpec, MonteCarloConfig, PairClass,
};
use hoptomo_core::procmat::{preset, ProcessMatrix, PRESETS};
use hoptomo_core::recon::{
    default_eps_grid, eps_grid, reconstruct, reconstruction_program, sweep_worst_case,
    WorstCaseOptions,
};
use hoptomo_core::simlab::{
    exact_probabilities, normalize, simulate_counts, stat_error, NoiseModel, ProbabilityTable,
};
use hoptomo_core::tomoset::SettingFamily;

use crate::formats::{
    from_json, read_table, to_json, write_counts, write_probabilities, write_settings, write_sweep,
    MatrixFile, ProgramDump, ReconstructionFile, RobustnessFile, Table, TableMeta, WitnessFile,
};
use crate::manifest::{manifest_path, Manifest};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hoptomo",
    version,
    about = "Process-matrix tomography for the two-party quantum switch"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an ideal process matrix.
    Ideal(RunConfig),
    /// List the setting configurations of a family with operator hashes.
    Settings(RunConfig),
    /// Sample counts (or exact probabilities without --shots).
    Simulate(RunConfig),
    /// Fit a valid process to a count or probability table.
    Reconstruct(RunConfig),
    /// Optimal causal witness for a process.
    Witness(RunConfig),
    /// White-noise or generalized robustness of a process.
    Robustness(RunConfig),
    /// Worst-case witness values over an ε grid.
    WorstCase(RunConfig),
    /// Commutation-game success probabilities.
    Game(RunConfig),
    /// Monte Carlo error bars, or CSV export of an existing report.
    Report(RunConfig),
}

impl Command {
    fn parts(&self) -> (&'static str, &RunConfig) {
        match self {
            Command::Ideal(c) => ("ideal", c),
            Command::Settings(c) => ("settings", c),
            Command::Simulate(c) => ("simulate", c),
            Command::Reconstruct(c) => ("reconstruct", c),
            Command::Witness(c) => ("witness", c),
            Command::Robustness(c) => ("robustness", c),
            Command::WorstCase(c) => ("worst-case", c),
            Command::Game(c) => ("game", c),
            Command::Report(c) => ("report", c),
        }
    }
}

/// Options shared by all commands. A `--config` file supplies the same
/// keys as JSON; flags given on the command line take precedence.
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// JSON file with default values for these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Named preset (`ideal`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Preset name or matrix file.
    #[arg(long)]
    pub process: Option<String>,
    /// full | restricted
    #[arg(long)]
    pub family: Option<String>,
    /// convex | extended
    #[arg(long)]
    pub definition: Option<String>,
    /// white | generalized
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Waveplate jitter standard deviation in degrees.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Squared visibility v².
    #[arg(long)]
    pub visibility: Option<f64>,
    /// Count or probability table (`-` for stdin).
    #[arg(long)]
    pub counts: Option<String>,
    /// Witness files.
    #[arg(long)]
    pub witness: Vec<String>,
    /// start:end:step
    #[arg(long = "eps-grid")]
    pub eps_grid: Option<String>,
    /// Constrain Tr(W·X_F) = 0.
    #[arg(long = "impose-future-x")]
    pub impose_future_x: bool,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Existing report JSON (`report`).
    #[arg(long)]
    pub input: Option<String>,
    /// Output format (`csv`).
    #[arg(long)]
    pub emit: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "matrix-out")]
    pub matrix_out: Option<PathBuf>,
    #[arg(long = "dump-program")]
    pub dump_program: Option<PathBuf>,
}

macro_rules! or_file {
    ($cli:expr, $file:expr, $($field:ident),*) => {
        $( if $cli.$field.is_none() { $cli.$field = $file.$field.clone(); } )*
    };
}

impl RunConfig {
    fn merged(&self) -> Result<RunConfig, CliError> {
        let mut out = self.clone();
        let Some(path) = &self.config else {
            return Ok(out);
        };
        let text = std::fs::read_to_string(path).map_err(CliError::from_io)?;
        let file: RunConfig = from_json(&text, "config")?;
        or_file!(
            out,
            file,
            preset,
            process,
            family,
            definition,
            noise,
            shots,
            seed,
            jitter,
            visibility,
            counts,
            eps_grid,
            tolerance,
            max_iter,
            trials,
            input,
            emit,
            out,
            matrix_out,
            dump_program
        );
        if out.witness.is_empty() {
            out.witness = file.witness.clone();
        }
        out.impose_future_x |= file.impose_future_x;
        out.config = None;
        Ok(out)
    }

    /// Rejects options that the command would silently ignore.
    fn check_applicable(&self, command: &str) -> Result<(), CliError> {
        let allowed: &[&str] = match command {
            "ideal" => &["preset", "out"],
            "settings" => &["family", "emit", "out"],
            "simulate" => &[
                "process",
                "family",
                "shots",
                "seed",
                "jitter",
                "visibility",
                "out",
            ],
            "reconstruct" => &[
                "counts",
                "family",
                "impose_future_x",
                "tolerance",
                "max_iter",
                "out",
                "matrix_out",
                "dump_program",
            ],
            "witness" => &[
                "process",
                "family",
                "noise",
                "definition",
                "tolerance",
                "max_iter",
                "out",
                "matrix_out",
            ],
            "robustness" => &[
                "process",
                "family",
                "noise",
                "definition",
                "tolerance",
                "max_iter",
                "out",
            ],
            "worst-case" => &[
                "counts",
                "witness",
                "eps_grid",
                "impose_future_x",
                "tolerance",
                "max_iter",
                "out",
            ],
            "game" => &["visibility", "out"],
            "report" => &[
                "process",
                "family",
                "shots",
                "seed",
                "jitter",
                "visibility",
                "witness",
                "impose_future_x",
                "tolerance",
                "max_iter",
                "trials",
                "input",
                "emit",
                "out",
            ],
            _ => &[],
        };
        let value = serde_json::to_value(self).map_err(|e| CliError::io(e.to_string()))?;
        for (k, v) in value.as_object().expect("struct") {
            let set = match v {
                serde_json::Value::Null | serde_json::Value::Bool(false) => false,
                serde_json::Value::Array(a) => !a.is_empty(),
                _ => true,
            };
            if set && !allowed.contains(&k.as_str()) {
                return Err(CliError::validation(format!(
                    "option `{}` does not apply to `{command}`",
                    k.replace('_', "-")
                )));
            }
        }
        Ok(())
    }

    fn family_or(&self, default: SettingFamily) -> Result<SettingFamily, CliError> {
        Ok(self
            .family
            .as_deref()
            .map(SettingFamily::parse)
            .transpose()?
            .unwrap_or(default))
    }

    fn settings(&self, default_tol: f64) -> Result<SolverSettings, CliError> {
        let tol = self.tolerance.unwrap_or(default_tol);
        if !(tol > 0.0) {
            return Err(CliError::validation(format!(
                "tolerance {tol} must be positive"
            )));
        }
        let mut s = SolverSettings::default().with_tolerance(tol);
        if let Some(n) = self.max_iter {
            s.max_iter = n;
        }
        Ok(s)
    }

    fn noise_model(&self) -> Result<NoiseModel, CliError> {
        let mut m = match self.shots {
            Some(n) => NoiseModel::with_shots(n),
            None => NoiseModel::analytic(),
        };
        if let Some(j) = self.jitter {
            m = m.jitter(j);
        }
        if let Some(v) = self.visibility {
            m = m.visibility(v);
        }
        m.validate()?;
        Ok(m)
    }
}

/// Preset name or matrix file.
pub fn load_process(spec: &str) -> Result<ProcessMatrix, CliError> {
    if PRESETS.contains(&spec) {
        return Ok(preset(spec)?);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| {
        CliError::validation(format!(
            "`{spec}` is neither a preset ({}) nor a readable file: {e}",
            PRESETS.join(", ")
        ))
    })?;
    from_json::<MatrixFile>(&text, spec)?.process()
}

fn read_input(spec: &str) -> Result<Box<dyn Read>, CliError> {
    if spec == "-" {
        Ok(Box::new(io::stdin()))
    } else {
        Ok(Box::new(
            File::open(spec).map_err(|e| CliError::io(format!("{spec}: {e}")))?,
        ))
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => {
            std::fs::write(p, bytes).map_err(|e| CliError::io(format!("{}: {e}", p.display())))
        }
        None => io::stdout().write_all(bytes).map_err(CliError::from_io),
    }
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

/// Reads a table and enforces `--family` when both are given.
fn load_table(cfg: &RunConfig) -> Result<(Table, TableMeta), CliError> {
    let spec = cfg.counts.as_deref().unwrap_or("-");
    let (table, meta) = read_table(&mut read_input(spec)?)?;
    if let Some(f) = &cfg.family {
        let f = SettingFamily::parse(f)?;
        if f != table.family() {
            return Err(hoptomo_core::Error::FamilyMismatch {
                expected: f.name(),
                found: table.family().name(),
            }
            .into());
        }
    }
    Ok((table, meta))
}

fn probabilities(table: &Table) -> Result<ProbabilityTable, CliError> {
    Ok(match table {
        Table::Counts(c) => normalize(c)?,
        Table::Probabilities(p) => p.clone(),
    })
}

struct Outcome {
    outputs: Vec<String>,
    seeds: Vec<u64>,
}

fn execute(command: &str, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = cfg.out.as_deref();
    let mut outputs: Vec<String> = out.map(path_string).into_iter().collect();
    let mut seeds = Vec::new();
    match command {
        "ideal" => {
            let name = cfg
                .preset
                .as_deref()
                .ok_or_else(|| CliError::validation("`ideal` needs --preset"))?;
            let w = preset(name)?;
            write_output(out, to_json(&MatrixFile::from_process(&w))?.as_bytes())?;
        }
        "settings" => {
            if cfg.emit.as_deref().unwrap_or("csv") != "csv" {
                return Err(CliError::validation("settings can only be emitted as csv"));
            }
            let mut buf = Vec::new();
            write_settings(&mut buf, cfg.family_or(SettingFamily::Full)?)?;
            write_output(out, &buf)?;
        }
        "simulate" => {
            let name = cfg.process.as_deref().unwrap_or("switch-y-");
            let w = load_process(name)?;
            let family = cfg.family_or(SettingFamily::Restricted)?;
            let noise = cfg.noise_model()?;
            let meta = TableMeta::new(family).with("process", name);
            let mut buf = Vec::new();
            if noise.shots.is_some() {
                let seed = cfg.seed.unwrap_or(0);
                seeds.push(seed);
                let counts = simulate_counts(&w, family, &noise, seed)?;
                let meta = match cfg.jitter {
                    Some(j) => meta.with("jitter", j),
                    None => meta,
                };
                let meta = match cfg.visibility {
                    Some(v) => meta.with("visibility", v),
                    None => meta,
                };
                write_counts(&mut buf, &counts, meta)?;
            } else {
                if cfg.jitter.is_some() || cfg.visibility.is_some() || cfg.seed.is_some() {
                    return Err(CliError::validation(
                        "--jitter, --visibility and --seed need --shots",
                    ));
                }
                write_probabilities(&mut buf, &exact_probabilities(&w, family)?, meta)?;
            }
            write_output(out, &buf)?;
        }
        "reconstruct" => {
            let (table, meta) = load_table(cfg)?;
            let p = probabilities(&table)?;
            let settings = cfg.settings(1e-6)?;
            if let Some(path) = &cfg.dump_program {
                let program = reconstruction_program(&p, cfg.impose_future_x)?;
                std::fs::write(path, to_json(&ProgramDump::new(&program))?)
                    .map_err(CliError::from_io)?;
                outputs.push(path_string(path));
            }
            let rec = reconstruct(&p, cfg.impose_future_x, &settings)?;
            let matrix_path = match (&cfg.matrix_out, out) {
                (Some(m), _) => m.clone(),
                (None, Some(o)) => PathBuf::from(format!("{}.matrix.json", o.display())),
                (None, None) => PathBuf::from("reconstruction.matrix.json"),
            };
            std::fs::write(
                &matrix_path,
                to_json(&MatrixFile::from_process(&rec.process))?,
            )
            .map_err(CliError::from_io)?;
            outputs.push(path_string(&matrix_path));
            let mut file = ReconstructionFile::new(&rec, path_string(&matrix_path));
            if let Table::Counts(c) = &table {
                file.stat_error = Some(stat_error(&p, c)?.eta);
                seeds.extend(c.seed);
            }
            if let Some(src) = meta
                .entries
                .get("process")
                .filter(|s| PRESETS.contains(&s.as_str()))
            {
                file.fidelity_to_source = Some(fidelity(&rec.process, &preset(src)?)?);
                file.source = Some(src.clone());
            }
            write_output(out, to_json(&file)?.as_bytes())?;
        }
        "witness" => {
            let name = cfg.process.as_deref().unwrap_or("switch-y-");
            let w = load_process(name)?;
            let (family, noise, definition) = witness_kind(cfg)?;
            let g = optimal_witness(&w, family, noise, definition, &cfg.settings(1e-7)?)?;
            let matrix_ref = match &cfg.matrix_out {
                Some(m) => {
                    std::fs::write(
                        m,
                        to_json(&MatrixFile::from_matrix(&g.matrix(), &g.layout))?,
                    )
                    .map_err(CliError::from_io)?;
                    outputs.push(path_string(m));
                    Some(path_string(m))
                }
                None => None,
            };
            let mut file = WitnessFile::new(&g, matrix_ref);
            file.value = Some(g.evaluate(&w)?);
            file.process = Some(name.to_string());
            write_output(out, to_json(&file)?.as_bytes())?;
        }
        "robustness" => {
            let name = cfg.process.as_deref().unwrap_or("switch-y-");
            let w = load_process(name)?;
            let (family, noise, definition) = witness_kind(cfg)?;
            let r = robustness(&w, family, noise, definition, &cfg.settings(1e-7)?)?;
            write_output(out, to_json(&RobustnessFile::new(&r, name))?.as_bytes())?;
        }
        "worst-case" => {
            if cfg.witness.is_empty() {
                return Err(CliError::validation(
                    "`worst-case` needs at least one --witness file",
                ));
            }
            let (table, _) = load_table(cfg)?;
            let p = probabilities(&table)?;
            let witnesses = load_witnesses(&cfg.witness)?;
            let settings = cfg.settings(1e-6)?;
            let rec = reconstruct(&p, cfg.impose_future_x, &settings)?;
            let grid = match &cfg.eps_grid {
                Some(g) => parse_grid(g)?,
                None => default_eps_grid(rec.residual),
            };
            let opts = WorstCaseOptions {
                future_x: cfg.impose_future_x,
                reference: Some(rec.clone()),
                settings,
            };
            let sweep = sweep_worst_case(&p, &witnesses, &grid, &opts)?;
            let mut buf = Vec::new();
            write_sweep(&mut buf, &sweep, &cfg.witness)?;
            write_output(out, &buf)?;
        }
        "game" => {
            let spec = GameSpec::pauli(cfg.visibility.unwrap_or(1.0))?;
            let res = game_success(&spec)?;
            let names = ["I", "X", "Y", "Z"];
            let mut pairs = Vec::new();
            let mut k = 0;
            for i in 0..4 {
                for j in i..4 {
                    pairs.push(GamePairReport {
                        ua: names[i].into(),
                        ub: names[j].into(),
                        class: match res.classes[k] {
                            PairClass::Commute => "commute",
                            PairClass::Anticommute => "anticommute",
                        }
                        .into(),
                        p_correct: res.per_pair[k],
                    });
                    k += 1;
                }
            }
            let report = GameReport {
                visibility2: spec.visibility2,
                pairs,
                p_succ: res.p_succ,
            };
            write_output(out, to_json(&report)?.as_bytes())?;
        }
        "report" => {
            let report = match &cfg.input {
                Some(path) => {
                    let mut text = String::new();
                    read_input(path)?
                        .read_to_string(&mut text)
                        .map_err(CliError::from_io)?;
                    from_json::<Report>(&text, path)?
                }
                None => {
                    let r = monte_carlo(cfg)?;
                    seeds.extend(r.seeds.iter().copied());
                    r
                }
            };
            let bytes = match cfg.emit.as_deref() {
                None | Some("json") => to_json(&report)?.into_bytes(),
                Some("csv") => report_csv(&report)?,
                Some(other) => {
                    return Err(CliError::validation(format!(
                        "unknown report format `{other}`"
                    )))
                }
            };
            write_output(out, &bytes)?;
        }
        other => return Err(CliError::validation(format!("unknown command `{other}`"))),
    }
    if let Some(s) = cfg.seed {
        if !seeds.contains(&s) {
            seeds.insert(0, s);
        }
    }
    Ok(Outcome { outputs, seeds })
}

fn witness_kind(
    cfg: &RunConfig,
) -> Result<(SettingFamily, NoiseType, SeparabilityDefinition), CliError> {
    Ok((
        cfg.family_or(SettingFamily::Full)?,
        cfg.noise
            .as_deref()
            .map(NoiseType::parse)
            .transpose()?
            .unwrap_or(NoiseType::WhiteNoise),
        cfg.definition
            .as_deref()
            .map(SeparabilityDefinition::parse)
            .transpose()?
            .unwrap_or(SeparabilityDefinition::ConvexMixture),
    ))
}

fn load_witnesses(paths: &[String]) -> Result<Vec<Witness>, CliError> {
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(format!("{p}: {e}")))?;
            from_json::<WitnessFile>(&text, p)?.witness()
        })
        .collect()
}

/// `start:end:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::validation(format!(
            "--eps-grid `{s}` is not start:end:step"
        )));
    }
    let num = |x: &str| {
        x.parse::<f64>()
            .map_err(|_| CliError::validation(format!("bad number `{x}` in --eps-grid")))
    };
    Ok(eps_grid(num(parts[0])?, num(parts[1])?, num(parts[2])?)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GamePairReport {
    pub ua: String,
    pub ub: String,
    pub class: String,
    pub p_correct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameReport {
    pub visibility2: f64,
    pub pairs: Vec<GamePairReport>,
    pub p_succ: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadReport {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

/// Monte Carlo report consumed by `report --input`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub process: String,
    pub family: String,
    pub shots: Option<u64>,
    pub jitter_deg: Option<f64>,
    pub visibility2: Option<f64>,
    pub future_x: bool,
    pub seeds: Vec<u64>,
    pub fidelity: SpreadReport,
    pub residual: SpreadReport,
    pub eta: SpreadReport,
    pub witnesses: Vec<String>,
    pub witness: Vec<SpreadReport>,
}

fn spread(s: &hoptomo_core::metrics::Spread) -> SpreadReport {
    SpreadReport {
        mean: s.mean,
        std: s.std,
        values: s.values.clone(),
    }
}

fn monte_carlo(cfg: &RunConfig) -> Result<Report, CliError> {
    let name = cfg.process.as_deref().unwrap_or("switch-y-");
    let process = load_process(name)?;
    let family = cfg.family_or(SettingFamily::Restricted)?;
    let noise = cfg.noise_model()?;
    let witnesses = load_witnesses(&cfg.witness)?;
    let mc = MonteCarloConfig {
        process,
        family,
        noise: noise.clone(),
        future_x: cfg.impose_future_x,
        witnesses,
        settings: cfg.settings(1e-6)?,
    };
    let r = monte_carlo_errorbars(&mc, cfg.trials.unwrap_or(10), cfg.seed.unwrap_or(0))?;
    Ok(Report {
        process: name.to_string(),
        family: family.name().to_string(),
        shots: noise.shots,
        jitter_deg: noise.jitter_deg,
        visibility2: noise.visibility2,
        future_x: cfg.impose_future_x,
        seeds: r.seeds.clone(),
        fidelity: spread(&r.fidelity),
        residual: spread(&r.residual),
        eta: spread(&r.eta),
        witnesses: cfg.witness.clone(),
        witness: r.witness.iter().map(spread).collect(),
    })
}

/// One row per trial: seed, fidelity, residual, η, then each witness.
fn report_csv(r: &Report) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "trial".to_string(),
        "seed".into(),
        "fidelity".into(),
        "residual".into(),
        "eta".into(),
    ];
    header.extend(r.witnesses.iter().cloned());
    w.write_record(&header).map_err(CliError::from_csv)?;
    for (t, seed) in r.seeds.iter().enumerate() {
        let mut rec = vec![
            t.to_string(),
            seed.to_string(),
            format!("{:?}", r.fidelity.values[t]),
            format!("{:?}", r.residual.values[t]),
            format!("{:?}", r.eta.values[t]),
        ];
        rec.extend(r.witness.iter().map(|s| format!("{:?}", s.values[t])));
        w.write_record(&rec).map_err(CliError::from_csv)?;
    }
    w.into_inner().map_err(|e| CliError::io(e.to_string()))
}

fn run_command(command: &Command) -> Result<(), CliError> {
    let (name, raw) = command.parts();
    let cfg = raw.merged()?;
    cfg.check_applicable(name)?;
    let outcome = execute(name, &cfg)?;
    let config = serde_json::to_value(&cfg).map_err(|e| CliError::io(e.to_string()))?;
    let manifest = Manifest::new(name, config, outcome.seeds, outcome.outputs);
    manifest.write(&manifest_path(name, cfg.out.as_deref()))
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = CliError::validation(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code;
        }
    };
    match run_command(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code
        }
    }
}
