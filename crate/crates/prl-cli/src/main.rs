//! `prl` — simulate, verify, and benchmark self-stabilizing leader election
//! on directed rings.
//!
//! Subcommands: `run` (one seeded execution), `bench` (convergence sweep with
//! power-law fit), `verify` (exhaustive/sampled small-ring checking), and
//! `compare` (main protocol vs. oracle baseline).
//!
//! Exit codes: 0 success, 1 invariant violation or counterexample found,
//! 2 usage error, 3 step cap exceeded.

mod commands;

use clap::{Args, Parser, Subcommand};
use prl::bench::ProtocolKind;
use prl::engine::InitFamily;
use std::path::PathBuf;
use std::str::FromStr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Parser)]
#[command(name = "prl", version, about = "Leader election on directed rings: simulate, verify, benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded run and emit its result as JSON.
    Run(RunArgs),
    /// Sweep ring sizes, fit a power law to mean convergence times.
    Bench(BenchArgs),
    /// Check class closure, transition properties, and output safety.
    Verify(VerifyArgs),
    /// Benchmark the main protocol against the oracle baseline.
    Compare(CompareArgs),
}

fn parse_protocol(s: &str) -> Result<ProtocolKind, String> {
    ProtocolKind::from_str(s)
}

fn parse_family(s: &str) -> Result<InitFamily, String> {
    InitFamily::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct RunArgs {
    /// Protocol: prl or fj.
    #[arg(long, default_value = "prl", value_parser = parse_protocol)]
    protocol: ProtocolKind,
    /// Ring size.
    #[arg(long)]
    n: usize,
    /// Population bound N (defaults to n).
    #[arg(long = "N")]
    n_upper: Option<u32>,
    /// Initial configuration family.
    #[arg(long, default_value = "uniform", value_parser = parse_family)]
    init: InitFamily,
    /// Scheduler seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step cap (default: 200*n*N for prl, 200*n^3 for fj).
    #[arg(long = "max-steps")]
    max_steps: Option<u64>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Protocol: prl or fj.
    #[arg(long, default_value = "prl", value_parser = parse_protocol)]
    protocol: ProtocolKind,
    /// Comma-separated ring sizes, one sweep point each.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Fixed population bound for every point.
    #[arg(long = "N")]
    n_upper: Option<u32>,
    /// Use N = n at every point (the default when no bound rule is given).
    #[arg(long = "match-N", conflicts_with = "n_upper")]
    match_n: bool,
    /// Use N = mult * n at every point.
    #[arg(long = "N-mult", conflicts_with_all = ["n_upper", "match_n"])]
    n_mult: Option<u32>,
    /// Seeded runs per point.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Family name, or "worst-case" to probe the adversarial families at the
    /// smallest point and keep the slowest.
    #[arg(long, default_value = "worst-case")]
    init: String,
    /// Master seed; per-run seeds are derived from (master, point, run).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed step cap overriding the default rule.
    #[arg(long = "max-steps")]
    max_steps: Option<u64>,
    /// Write per-run CSV rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the sweep summary and fit JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Ring size.
    #[arg(long)]
    n: usize,
    /// Population bound N.
    #[arg(long = "N")]
    n_upper: u32,
    /// Comma-separated checks: closure, transitions, safety.
    #[arg(long, value_delimiter = ',', default_values_t = [String::from("closure"), String::from("transitions"), String::from("safety")])]
    checks: Vec<String>,
    /// exhaustive or sampled (sampled covers the transitions check only).
    #[arg(long, default_value = "exhaustive")]
    mode: String,
    /// Sampled configurations when --mode sampled.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Seed for sampled mode.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enumeration budget for exhaustive passes.
    #[arg(long, default_value_t = prl::verifier::DEFAULT_CONFIG_BUDGET)]
    budget: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated ring sizes shared by both protocols (N = n).
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32])]
    n: Vec<usize>,
    /// Seeded runs per point per protocol.
    #[arg(long, default_value_t = 50)]
    runs: usize,
    /// Family name or "worst-case" (probed per protocol).
    #[arg(long, default_value = "worst-case")]
    init: String,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed step cap overriding the default rule.
    #[arg(long = "max-steps")]
    max_steps: Option<u64>,
    /// Write the merged per-run CSV rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the comparison JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Bench(args) => commands::bench(args),
        Command::Verify(args) => commands::verify(args),
        Command::Compare(args) => commands::compare(args),
    };
    let code = match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
