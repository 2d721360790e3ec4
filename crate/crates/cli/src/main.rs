//! `sarv`: saturate rule programs, check compliance, fit qualifiers.
//!
//! Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | Clean or Resolved (check), Fixpoint (run) |
//! | 1    | unresolved Warning                        |
//! | 2    | Failure                                   |
//! | 3    | a saturation bound was hit                |
//! | 64   | usage error                               |
//! | 65   | malformed rules, facts or data            |
//! | 66   | input file missing                        |
//! | 74   | other I/O error                           |

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sarv_core::compliance::{compliance_report, extract_verdicts, VerdictKind};
use sarv_core::engine::{saturate, Limits, SaturationResult, Status};
use sarv_core::karb::{
    evaluate, fit, generate_synthetic, ingest_csv, Binarization, FitConfig, Objective, Qualifier, Schema,
    SyntheticConfig,
};
use sarv_core::lattice::build_lattice;
use sarv_core::{parse_facts, parse_sources, Program, Term};
use serde_json::json;

const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_NOINPUT: u8 = 66;
const EX_IOERR: u8 = 74;

#[derive(Parser)]
#[command(name = "sarv", version, about = "Stateless rule-based verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Saturate, classify verdicts and write a compliance report.
    Check(CheckArgs),
    /// Saturate and print the resulting facts.
    Run(RunArgs),
    /// Fit, evaluate or synthesize data for weighted qualifiers.
    #[command(subcommand)]
    Karb(KarbCommand),
}

#[derive(Args)]
struct EngineArgs {
    /// Rule files, concatenated in the order given.
    #[arg(long, required = true, num_args = 1..)]
    rules: Vec<PathBuf>,
    /// Override limits, e.g. `max_rounds=20 depth=8`.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    limits: Vec<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Fact files.
    #[arg(long, required = true, num_args = 1..)]
    facts: Vec<PathBuf>,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the lattice as DOT.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Where to write the lattice as JSON.
    #[arg(long)]
    lattice: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, num_args = 1..)]
    facts: Vec<PathBuf>,
    /// Print every fact, one per line, in canonical order.
    #[arg(long)]
    dump_facts: bool,
}

#[derive(Subcommand)]
enum KarbCommand {
    /// Fit signal weights and threshold to a labeled dataset.
    Fit(FitArgs),
    /// Report classification metrics of a saved qualifier.
    Eval(EvalArgs),
    /// Write a labeled dataset generated from a planted qualifier.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    ErrorRate,
    Mse,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    rules: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 2)]
    restarts: usize,
    /// Output path for the fitted qualifier.
    #[arg(long)]
    qualifier: PathBuf,
    #[arg(long, default_value = "label = 5")]
    binarize: String,
    #[arg(long, value_enum, default_value = "error-rate")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    #[arg(long, default_value_t = 0.995)]
    decay: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    rules: Vec<PathBuf>,
    #[arg(long)]
    qualifier: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, required = true, num_args = 1..)]
    rules: Vec<PathBuf>,
    /// Qualifier whose predictions become the labels.
    #[arg(long)]
    planted: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EX_USAGE } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Check(a) => check(a),
        Command::Run(a) => run(a),
        Command::Karb(KarbCommand::Fit(a)) => karb_fit(a),
        Command::Karb(KarbCommand::Eval(a)) => karb_eval(a),
        Command::Karb(KarbCommand::Synth(a)) => karb_synth(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("sarv: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| {
        let code = if e.kind() == io::ErrorKind::NotFound { EX_NOINPUT } else { EX_IOERR };
        Failure::new(code, format!("{}: {e}", path.display()))
    })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(EX_IOERR, format!("{}: {e}", path.display())))
}

fn load_program(paths: &[PathBuf]) -> Result<Program, Failure> {
    let sources = paths.iter().map(|p| Ok((p.display().to_string(), read(p)?))).collect::<Result<Vec<_>, Failure>>()?;
    parse_sources(&sources).map_err(|e| {
        let token = e.token.as_deref().map(|t| format!(" at `{t}`")).unwrap_or_default();
        Failure::new(EX_DATAERR, format!("{e}{token}"))
    })
}

fn load_facts(paths: &[PathBuf]) -> Result<Vec<Term>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        let text = read(p)?;
        out.extend(parse_facts(&p.display().to_string(), &text).map_err(|e| Failure::new(EX_DATAERR, e.to_string()))?);
    }
    Ok(out)
}

fn limits(pairs: &[String]) -> Result<Limits, Failure> {
    let mut lim = Limits::default();
    for pair in pairs {
        let (k, v) =
            pair.split_once('=').ok_or_else(|| Failure::new(EX_USAGE, format!("limit `{pair}` is not KEY=VALUE")))?;
        lim.set(k, v).map_err(|e| Failure::new(EX_USAGE, e))?;
    }
    Ok(lim)
}

fn engine(args: &EngineArgs, facts: &[PathBuf]) -> Result<(Program, SaturationResult), Failure> {
    let lim = limits(&args.limits)?;
    let program = load_program(&args.rules)?;
    let extra = load_facts(facts)?;
    let result = saturate(&program, &extra, &lim);
    let mut err = io::stderr().lock();
    for d in &result.diagnostics {
        let _ = writeln!(err, "{d}");
    }
    Ok((program, result))
}

fn check(a: CheckArgs) -> Outcome {
    let (program, result) = engine(&a.engine, &a.facts)?;
    let lattice = build_lattice(&result);
    let report = compliance_report(extract_verdicts(&result.memory), &lattice, &result, &program);
    if let Some(path) = &a.out {
        write(path, &(report.to_json() + "\n"))?;
    }
    if let Some(path) = &a.dot {
        write(path, &lattice.to_dot())?;
    }
    if let Some(path) = &a.lattice {
        write(path, &(lattice.to_json() + "\n"))?;
    }
    println!(
        "overall: {} ({}, {} rounds, {} facts)",
        report.overall,
        result.status,
        result.rounds_used,
        result.memory.len()
    );
    for v in &report.verdicts {
        if let Some(s) = &v.subject {
            println!("{}: {}", v.kind, s);
        }
    }
    Ok(match (result.status, report.overall) {
        (Status::BoundHit(_), _) => 3,
        (_, VerdictKind::Failure) => 2,
        (_, VerdictKind::Warning) => 1,
        _ => 0,
    })
}

fn run(a: RunArgs) -> Outcome {
    let (_, result) = engine(&a.engine, &a.facts)?;
    let mut out = io::stdout().lock();
    if a.dump_facts {
        let _ = out.write_all(result.dump().as_bytes());
    }
    let _ = writeln!(out, "# {} after {} rounds, {} facts", result.status, result.rounds_used, result.memory.len());
    Ok(if result.status == Status::Fixpoint { 0 } else { 3 })
}

fn data_err(e: impl std::fmt::Display) -> Failure {
    Failure::new(EX_DATAERR, e.to_string())
}

fn karb_fit(a: FitArgs) -> Outcome {
    let rules = load_program(&a.rules)?;
    let data = ingest_csv(&read(&a.dataset)?, &Schema::default())
        .map_err(|e| data_err(format!("{}: {e}", a.dataset.display())))?;
    let cfg = FitConfig {
        seed: a.seed,
        iterations: a.iters,
        restarts: a.restarts,
        initial_step: a.step,
        decay: a.decay,
        objective: match a.objective {
            ObjectiveArg::ErrorRate => Objective::ErrorRate,
            ObjectiveArg::Mse => Objective::Mse,
        },
        binarization: a.binarize.parse::<Binarization>().map_err(|e| Failure::new(EX_USAGE, e.to_string()))?,
    };
    let report = fit(&rules, &data, &cfg).map_err(data_err)?;
    write(&a.qualifier, &(report.qualifier.to_json() + "\n"))?;
    let summary = json!({
        "fitness": report.fitness,
        "objective": cfg.objective,
        "restarts": report.restarts,
        "bound_hits": report.bound_hits,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(0)
}

fn karb_eval(a: EvalArgs) -> Outcome {
    let rules = load_program(&a.rules)?;
    let q = Qualifier::from_json(&read(&a.qualifier)?, rules)
        .map_err(|e| data_err(format!("{}: {e}", a.qualifier.display())))?;
    let data = ingest_csv(&read(&a.dataset)?, &Schema::default())
        .map_err(|e| data_err(format!("{}: {e}", a.dataset.display())))?;
    let m = evaluate(&q, &data).map_err(data_err)?;
    println!("{}", serde_json::to_string_pretty(&m).expect("metrics serialize"));
    Ok(0)
}

fn karb_synth(a: SynthArgs) -> Outcome {
    let rules = load_program(&a.rules)?;
    let planted = Qualifier::from_json(&read(&a.planted)?, rules)
        .map_err(|e| data_err(format!("{}: {e}", a.planted.display())))?;
    let cfg = SyntheticConfig { noise: a.noise, ..SyntheticConfig::quality() };
    let data = generate_synthetic(a.seed, a.n, &planted, &cfg).map_err(data_err)?;
    write(&a.out, &data.to_csv(&cfg))?;
    let flips = data.flipped.iter().filter(|f| **f).count();
    println!("{} records, {} labels flipped", data.records.len(), flips);
    Ok(0)
}
