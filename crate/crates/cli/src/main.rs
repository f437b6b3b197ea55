use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

mod config;
mod run;

use config::{ConfigError, ExperimentConfig, RawConfig, SolverKind};
use run::RunError;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_BOUND: u8 = 4;

#[derive(Parser)]
#[command(name = "mixnash", version, about = "Mixed-strategy equilibrium solvers and verification checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver named in the config.
    Solve(Common),
    /// Run the measure-level identity and inequality suite.
    CheckFoundations(Common),
    /// Sample a unit Gaussian with Langevin dynamics and test the draws.
    CheckSgld(Common),
    /// Run a gap-tracking solver over all seeds and fit its rate.
    Rates(Common),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines under `[section]` headers.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    trace_stride: Option<usize>,
    /// Exit with status 4 when a bound or check fails.
    #[arg(long)]
    assert_bounds: bool,
}

fn load(args: &Common, forced: Option<SolverKind>, need_rate: bool) -> Result<ExperimentConfig, ConfigError> {
    let (mut raw, base) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::general(format!("{}: {e}", path.display())))?;
            let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            (RawConfig::parse(&text)?, base)
        }
        None => (RawConfig::default(), PathBuf::from(".")),
    };
    if let Some(s) = forced {
        let name = match s {
            SolverKind::Foundations => "foundations",
            _ => "sgld_check",
        };
        raw.set("solver", name.into());
    }
    if let Some(seed) = args.seed {
        raw.set("seeds", seed.to_string());
    }
    if let Some(n) = args.trace_stride {
        raw.set("trace_stride", n.to_string());
    }
    let cfg = ExperimentConfig::resolve(raw, &base)?;
    if need_rate && !cfg.solver.has_rate() {
        return Err(ConfigError::key("solver", "rates needs md, mp, inf_md or inf_mp"));
    }
    Ok(cfg)
}

fn fail(kind: &str, code: u8, key: Option<&str>, line: Option<usize>, message: &str) -> ExitCode {
    let record = json!({
        "status": "error",
        "kind": kind,
        "key": key,
        "line": line,
        "message": message,
    });
    println!("{record}");
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, forced, need_rate) = match &cli.command {
        Command::Solve(a) => (a, None, false),
        Command::CheckFoundations(a) => (a, Some(SolverKind::Foundations), false),
        Command::CheckSgld(a) => (a, Some(SolverKind::SgldCheck), false),
        Command::Rates(a) => (a, None, true),
    };
    let cfg = match load(args, forced, need_rate) {
        Ok(c) => c,
        Err(e) => return fail("config", EXIT_CONFIG, e.key.as_deref(), e.line, &e.to_string()),
    };

    let start = Instant::now();
    let outcome = match run::execute(&cfg, &args.out) {
        Ok(o) => o,
        Err(RunError::Config(e)) => return fail("config", EXIT_CONFIG, e.key.as_deref(), e.line, &e.to_string()),
        Err(RunError::Numerical(m)) => return fail("numerical", EXIT_NUMERICAL, None, None, &m),
        Err(RunError::Io(m)) => return fail("io", EXIT_CONFIG, None, None, &m),
    };
    // Wall-clock data stays out of summary.json so reruns compare byte-for-byte.
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "elapsed_seconds": start.elapsed().as_secs_f64(),
    });
    let meta_path = args.out.join("metadata.json");
    if let Err(e) = std::fs::write(&meta_path, format!("{meta:#}\n")) {
        return fail("io", EXIT_CONFIG, None, None, &format!("{}: {e}", meta_path.display()));
    }

    println!("{}", json!({ "status": "ok", "pass": outcome.pass, "out": args.out }));
    if args.assert_bounds && !outcome.pass {
        eprintln!("check failed; see {}", args.out.join("summary.json").display());
        return ExitCode::from(EXIT_BOUND);
    }
    ExitCode::SUCCESS
}
