//! `crnkit`: parse, simulate, decide, reach, compile and check chemical
//! reaction networks.
//!
//! Exit codes: 0 success or Accept, 1 Reject or failed check, 2 parse or
//! usage error, 3 semantic error, 4 runtime failure, 5 Undecided or
//! Inconclusive.

mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use manifest::{FileHash, Manifest, Recorder};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "crnkit", version, about = "Chemical reaction network toolkit")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for batched runs (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true, default_value = "crnkit-out")]
    pub out_dir: PathBuf,
    /// Trajectory file format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a .crn file and print its canonical form.
    Parse { file: PathBuf },
    /// Stochastic (SSA) or mass-action ODE simulation.
    Simulate(SimulateArgs),
    /// Decide an input with a CRD, a CRC, or a predicate.
    Decide(DecideArgs),
    /// Explore the reachable state graph.
    Reach(ReachArgs),
    /// Compile a counter automaton, a predicate atom, or a DSD implementation.
    Compile(CompileArgs),
    /// Conservation, speed-fault, or DSD co-simulation check.
    Check(CheckArgs),
    /// Re-run a manifest and compare its outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    Ssa,
    Ode,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = SimMode::Ssa)]
    pub mode: SimMode,
    /// Time horizon (SSA: none by default; ODE: 100).
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Overrides `#volume`.
    #[arg(long)]
    pub volume: Option<f64>,
    /// Overrides `#init`, e.g. "3X + 5Y".
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_steps: u64,
    /// ODE error tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecideMode {
    Halting,
    Stable,
    /// Stabilized output counts of a CRC.
    Crc,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    /// CRD or CRC file; omit when using --predicate.
    pub file: Option<PathBuf>,
    /// Input counts, e.g. "2X + 3Y" (defaults to `#init`).
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, value_enum, default_value_t = DecideMode::Halting)]
    pub mode: DecideMode,
    #[arg(long, default_value_t = crnkit::reach::DEFAULT_BOUND)]
    pub bound: usize,
    /// Predicate over X1..Xk, e.g. "and(mod(1,-1;0;3),le(1,0;4))".
    #[arg(long, conflicts_with = "file")]
    pub predicate: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long, default_value_t = crnkit::reach::DEFAULT_BOUND)]
    pub bound: usize,
    /// Keep only k-fast edges.
    #[arg(long)]
    pub kfast: Option<u64>,
    /// Also write a Graphviz rendering.
    #[arg(long)]
    pub dot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Ca,
    Predicate,
    Dsd,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long, value_enum)]
    pub from: Source,
    /// A .ca file, a predicate expression, or a .crn file.
    pub source: String,
    /// Clock length for counter automata.
    #[arg(long, default_value_t = 8)]
    pub l: usize,
    /// Input value ν; adds an `#init` line to the compiled automaton.
    #[arg(long)]
    pub nu: Option<u64>,
    /// Number of D molecules (default 10ν + 10).
    #[arg(long)]
    pub n_d: Option<u64>,
    /// Copies of each fuel species (default 20·‖init‖).
    #[arg(long)]
    pub fuel: Option<u64>,
    /// Output path, relative to --out-dir.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Conservation,
    Speedfault,
    Cosim,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub file: PathBuf,
    #[arg(long, value_enum)]
    pub what: Check,
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub k: u64,
    #[arg(long, default_value_t = crnkit::reach::DEFAULT_BOUND)]
    pub bound: usize,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long)]
    pub fuel: Option<u64>,
    #[arg(long)]
    pub volume: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Where the replay writes (default: `replay/` beside the manifest).
    #[arg(long)]
    pub into: Option<PathBuf>,
}

/// An error carrying its exit code.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    Failure { code: 2, message: message.into() }.into()
}

pub fn semantic(message: impl Into<String>) -> anyhow::Error {
    Failure { code: 3, message: message.into() }.into()
}

pub fn runtime(message: impl Into<String>) -> anyhow::Error {
    Failure { code: 4, message: message.into() }.into()
}

/// Set while a replay re-runs a command, so only the comparison is printed.
static QUIET: AtomicBool = AtomicBool::new(false);

/// Writes to stdout; a closed pipe is not an error.
pub fn emit(text: &str) {
    use std::io::Write;
    if QUIET.load(Ordering::Relaxed) {
        return;
    }
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

pub struct Invocation {
    pub code: u8,
    pub outputs: Vec<FileHash>,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    e.downcast_ref::<Failure>().map_or(4, |f| f.code)
}

/// Runs one parsed command line and writes its manifest.
pub fn invoke(cli: Cli, argv: Vec<String>) -> Invocation {
    if let Some(n) = cli.jobs {
        // A pool may already exist when replaying in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Command::Replay(args) = &cli.command {
        let code = match replay(args) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                exit_code(&e)
            }
        };
        return Invocation { code, outputs: Vec::new() };
    }
    let start = Instant::now();
    let mut rec = Recorder::new(cli.out_dir.clone());
    let result = commands::run(&cli, &mut rec);
    let (code, error) = match result {
        Ok(c) => (c, None),
        Err(e) => {
            eprintln!("error: {e:#}");
            (exit_code(&e), Some(format!("{e:#}")))
        }
    };
    let m = Manifest {
        argv,
        cwd: std::env::current_dir().map(|d| d.display().to_string()).unwrap_or_default(),
        version: VERSION.to_string(),
        seed: cli.seed,
        rng: crnkit::stochastic::RNG_ALGORITHM.to_string(),
        inputs: rec.inputs.clone(),
        outputs: rec.outputs.clone(),
        exit_code: code,
        error,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    if let Err(e) = std::fs::create_dir_all(&cli.out_dir).and_then(|_| std::fs::write(cli.out_dir.join("manifest.json"), text)) {
        eprintln!("warning: could not write manifest: {e}");
    }
    Invocation { code, outputs: rec.outputs }
}

fn replay(args: &ReplayArgs) -> Result<u8> {
    let m = manifest::load(&args.manifest).map_err(|e| usage(format!("{e:#}")))?;
    let into = match &args.into {
        Some(p) => p.clone(),
        None => args.manifest.parent().unwrap_or(Path::new(".")).join("replay"),
    };
    let into = std::path::absolute(&into)?;
    if !m.cwd.is_empty() {
        std::env::set_current_dir(&m.cwd).map_err(|e| semantic(format!("cannot enter {}: {e}", m.cwd)))?;
    }
    for input in &m.inputs {
        let now = manifest::hash_file(Path::new(&input.path)).map_err(|e| semantic(format!("{e:#}")))?;
        if now != input.sha256 {
            return Err(semantic(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let mut argv = Vec::with_capacity(m.argv.len() + 2);
    let mut it = m.argv.iter();
    while let Some(a) = it.next() {
        if a == "--out-dir" {
            it.next();
        } else if !a.starts_with("--out-dir=") {
            argv.push(a.clone());
        }
    }
    argv.extend(["--out-dir".to_string(), into.display().to_string()]);
    let cli = Cli::try_parse_from(&argv).map_err(|e| usage(format!("recorded command line no longer parses: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(usage("a replay manifest cannot be replayed"));
    }
    QUIET.store(true, Ordering::Relaxed);
    let inv = invoke(cli, argv);
    QUIET.store(false, Ordering::Relaxed);
    let mut mismatches = Vec::new();
    for o in &m.outputs {
        match inv.outputs.iter().find(|p| p.path == o.path) {
            Some(p) if p.sha256 == o.sha256 => {}
            _ => mismatches.push(o.path.clone()),
        }
    }
    for p in &inv.outputs {
        if !m.outputs.iter().any(|o| o.path == p.path) {
            mismatches.push(p.path.clone());
        }
    }
    let identical = mismatches.is_empty() && inv.code == m.exit_code;
    let report = json!({
        "identical": identical,
        "exit_code": inv.code,
        "recorded_exit_code": m.exit_code,
        "mismatches": mismatches,
        "out_dir": into.display().to_string(),
    });
    emit(&(serde_json::to_string_pretty(&report)? + "\n"));
    Ok(if identical { 0 } else { 1 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    ExitCode::from(invoke(cli, argv).code)
}
