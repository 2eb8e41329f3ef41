use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use icbell_core::experiments::{
    repro_3322, repro_concavity, repro_correlated, repro_d2dd, repro_fig2, repro_oracle,
    repro_qbound, repro_result1, repro_uffink,
};
use icbell_core::inequality::{
    correlated_2222, d2dd_family, from_protocol_nn22, nndd_from_protocol, result1_nn22, uffink,
};
use icbell_core::oracle::{agreement_suite, validate_inequality};
use icbell_core::protocol::van_dam;
use icbell_core::{
    BoxFile, CollinsGisinTable, ExperimentResult, NsBox, PhaseConvention, Protocol,
    QuadraticInequality, RegionScan, DEFAULT_TOL,
};

#[derive(Parser)]
#[command(name = "icbell", version, about = "Quadratic Bell inequalities from information causality")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a box file is normalized, nonnegative and nonsignaling; print its biases.
    ValidateBox {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Emit the quadratic inequality of a protocol or a named family.
    Derive(DeriveArgs),
    /// Evaluate an inequality file on a box file.
    Evaluate {
        #[arg(long)]
        inequality: PathBuf,
        #[arg(long = "box")]
        box_path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Compare inequalities with the entropic oracle on seeded random boxes.
    Oracle {
        /// Protocol file; without it the random (box, protocol) agreement suite runs.
        #[arg(long)]
        protocol: Option<PathBuf>,
        /// Inequality file; defaults to the one derived from `--protocol`.
        #[arg(long)]
        inequality: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run a named reproduction experiment.
    Repro(ReproArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Canonical,
    VanDam,
    Uffink,
    D2dd,
    Correlated,
}

#[derive(Args)]
struct DeriveArgs {
    /// Protocol file (JSON with n, d, f, h, r).
    #[arg(long, conflicts_with = "family")]
    protocol: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Phase index for d-ary protocols.
    #[arg(long, default_value_t = 1)]
    t: usize,
    #[arg(long, value_enum, default_value_t = Phase::Derived)]
    phase: Phase,
    /// Input correlation for the correlated family.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    eps: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Phase {
    Derived,
    Displayed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Uffink,
    Result1,
    Qbound,
    #[value(name = "3322")]
    I3322,
    Fig2,
    D2dd,
    Correlated,
    Oracle,
    Concavity,
    All,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(value_enum)]
    name: Experiment,
    /// Largest n for result1 / qbound.
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Largest d for d2dd.
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 0.005)]
    grid_step: f64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(jobs) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    let out = Output { path: cli.common.out, format: cli.common.format };
    match cli.command {
        Command::ValidateBox { path, tol } => validate_box(&out, &path, tol),
        Command::Derive(args) => derive(&out, &args),
        Command::Evaluate { inequality, box_path, tol } => {
            let ineq: QuadraticInequality = read_json(&inequality)?;
            let bx = load_box(&box_path, tol)?;
            let ev = ineq.evaluate_with_tol(&bx.biases()?, tol)?;
            out.json(&ev)?;
            Ok(true)
        }
        Command::Oracle { protocol, inequality, trials, seed } => {
            oracle(&out, protocol.as_deref(), inequality.as_deref(), trials, seed)
        }
        Command::Repro(args) => repro(&out, &args),
    }
}

struct Output {
    path: Option<PathBuf>,
    format: Format,
}

impl Output {
    fn write(&self, text: &str) -> Result<()> {
        match &self.path {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                let mut stdout = io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    fn json<T: Serialize>(&self, v: &T) -> Result<()> {
        if self.format == Format::Csv {
            bail!("csv output is only available for repro experiments");
        }
        self.write(&(serde_json::to_string_pretty(v)? + "\n"))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Accepts either a full probability table or a Collins-Gisin table.
fn load_box(path: &Path, tol: f64) -> Result<NsBox> {
    let raw: Value = read_json(path)?;
    if raw.get("joint").is_some() {
        let cg: CollinsGisinTable = serde_json::from_value(raw)?;
        return Ok(NsBox::from_collins_gisin(&cg)?);
    }
    let file: BoxFile = serde_json::from_value(raw).with_context(|| format!("parsing {}", path.display()))?;
    let flat: Vec<f64> = file.p.iter().flatten().flatten().flatten().copied().collect();
    let expected = file.n_a * file.n_b * file.d_a * file.d_b;
    if flat.len() != expected {
        bail!("table has {} entries, expected {expected}", flat.len());
    }
    Ok(NsBox::with_tolerance(file.n_a, file.n_b, file.d_a, file.d_b, flat, tol)?)
}

fn validate_box(out: &Output, path: &Path, tol: f64) -> Result<bool> {
    let report = match load_box(path, tol) {
        Ok(bx) => {
            let biases = bx.biases().ok().map(|b| {
                json!({ "n_a": b.n_a(), "n_b": b.n_b(), "d": b.d(), "entries": b.entries() })
            });
            json!({
                "valid": true,
                "n_a": bx.n_a(),
                "n_b": bx.n_b(),
                "d_a": bx.d_a(),
                "d_b": bx.d_b(),
                "nonsignaling_residual": bx.nonsignaling_residual(),
                "biases": biases,
            })
        }
        Err(e) => match e.downcast_ref::<icbell_core::Error>() {
            Some(err) => json!({ "valid": false, "error": err.to_string() }),
            None => return Err(e),
        },
    };
    out.json(&report)?;
    Ok(report["valid"] == true)
}

fn derive(out: &Output, a: &DeriveArgs) -> Result<bool> {
    let phase = match a.phase {
        Phase::Derived => PhaseConvention::Derived,
        Phase::Displayed => PhaseConvention::Displayed,
    };
    if let Some(path) = &a.protocol {
        let p: Protocol = read_json(path)?;
        let ineq = if p.d() == 2 { from_protocol_nn22(&p)? } else { nndd_from_protocol(&p, a.t, phase)? };
        out.json(&ineq)?;
        return Ok(true);
    }
    let family = a.family.unwrap_or(Family::Canonical);
    match family {
        Family::Canonical if a.d == 2 => out.json(&result1_nn22(a.n)?)?,
        Family::Canonical => bail!("canonical family is binary; use --family d2dd or --protocol for d > 2"),
        Family::VanDam => out.json(&from_protocol_nn22(&van_dam())?)?,
        Family::Uffink => out.json(&uffink())?,
        Family::D2dd => out.json(&d2dd_family(a.d)?)?,
        Family::Correlated => out.json(&correlated_2222(a.eps)?)?,
    }
    Ok(true)
}

fn oracle(out: &Output, protocol: Option<&Path>, inequality: Option<&Path>, trials: usize, seed: u64) -> Result<bool> {
    let Some(pp) = protocol else {
        if inequality.is_some() {
            bail!("--inequality requires --protocol");
        }
        let r = agreement_suite(trials, seed)?;
        out.json(&r)?;
        return Ok(r.disagreements == 0);
    };
    let p: Protocol = read_json(pp)?;
    let ineq = match inequality {
        Some(path) => read_json(path)?,
        None => from_protocol_nn22(&p)?,
    };
    let r = validate_inequality(&ineq, &p, trials, seed)?;
    out.json(&r)?;
    Ok(r.disagreements == 0)
}

fn scan_csv(scan: &RegionScan) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["q1", "q2", "uffink_lhs", "envelope_lhs", "envelope_eps", "tlm_quantum"])?;
    for p in &scan.points {
        w.write_record([
            p.q1.to_string(),
            p.q2.to_string(),
            p.uffink_lhs.to_string(),
            p.envelope_lhs.to_string(),
            p.envelope_eps.to_string(),
            p.tlm_quantum.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn checks_csv(results: &[ExperimentResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["experiment", "check", "expected", "actual", "tolerance", "provenance", "passed"])?;
    for r in results {
        for c in &r.checks {
            w.write_record([
                r.name.clone(),
                c.name.clone(),
                c.expected.to_string(),
                c.actual.to_string(),
                c.tolerance.map(|t| t.to_string()).unwrap_or_default(),
                serde_json::to_value(c.provenance)?.as_str().unwrap_or_default().to_string(),
                c.passed.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn repro(out: &Output, a: &ReproArgs) -> Result<bool> {
    if a.name == Experiment::Fig2 {
        let scan = repro_fig2(a.grid_step)?;
        match out.format {
            Format::Csv => out.write(&scan_csv(&scan)?)?,
            Format::Json => out.json(&scan)?,
        }
        return Ok(scan.passed());
    }
    let names = match a.name {
        Experiment::All => vec![
            Experiment::Uffink,
            Experiment::Result1,
            Experiment::Qbound,
            Experiment::I3322,
            Experiment::D2dd,
            Experiment::Correlated,
            Experiment::Oracle,
            Experiment::Concavity,
        ],
        one => vec![one],
    };
    let mut results = Vec::new();
    for name in names {
        results.push(run_one(name, a)?);
    }
    if a.name == Experiment::All {
        let scan = repro_fig2(a.grid_step)?;
        results.push(ExperimentResult {
            name: "fig2".into(),
            parameters: [("grid_step".to_string(), json!(a.grid_step))].into(),
            values: [("max_boundary_offset".to_string(), json!(scan.max_boundary_offset))].into(),
            checks: scan.checks,
            runtime_secs: scan.runtime_secs,
        });
    }
    let ok = results.iter().all(ExperimentResult::passed);
    match out.format {
        Format::Csv => out.write(&checks_csv(&results)?)?,
        Format::Json if results.len() == 1 => out.json(&results[0])?,
        Format::Json => out.json(&results)?,
    }
    Ok(ok)
}

fn run_one(name: Experiment, a: &ReproArgs) -> Result<ExperimentResult> {
    let trials = |default: usize| a.trials.unwrap_or(default);
    Ok(match name {
        Experiment::Uffink => repro_uffink()?,
        Experiment::Result1 => repro_result1(a.n)?,
        Experiment::Qbound => repro_qbound(a.n)?,
        Experiment::I3322 => repro_3322()?,
        Experiment::D2dd => repro_d2dd(a.d, trials(200), a.seed)?,
        Experiment::Correlated => repro_correlated(trials(100), a.seed)?,
        Experiment::Oracle => repro_oracle(trials(500), a.seed)?,
        Experiment::Concavity => repro_concavity(trials(10_000), a.seed)?,
        Experiment::Fig2 | Experiment::All => unreachable!(),
    })
}
