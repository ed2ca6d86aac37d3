mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Generator, verifier and attack harness for GF(2^m) multipliers with
/// obfuscated irreducible polynomials.
#[derive(Debug, Parser)]
#[command(name = "gfobf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List irreducible polynomials of degree M.
    Polys(PolysArgs),
    /// Build a design bundle from a JSON config.
    Build(BuildArgs),
    /// Check a bundle against its true polynomial.
    Verify(VerifyArgs),
    /// Recover the true polynomial and key of a locked design.
    Attack(AttackArgs),
    /// Area/delay overhead against the plain multiplier.
    Sweep(SweepArgs),
    /// Cost every obfuscation order of a config.
    Orders(OrdersArgs),
    /// Serve a multiplier over the stdin/stdout line protocol.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolyFormat {
    Text,
    Hex,
    Json,
}

#[derive(Debug, Args)]
struct PolysArgs {
    m: usize,
    /// all, tri_penta or nist
    #[arg(long, default_value = "all")]
    filter: String,
    #[arg(long, value_enum, default_value_t = PolyFormat::Text)]
    format: PolyFormat,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    config: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlanMode {
    /// Exhaustive up to 24 input bits, random above.
    Auto,
    Exhaustive,
    Random,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, value_enum, default_value_t = PlanMode::Auto)]
    mode: PlanMode,
    /// Random vectors; 0 gives a vacuous pass.
    #[arg(long, default_value_t = 100_000)]
    vectors: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also check a representative key of every other class against its
    /// polynomial.
    #[arg(long)]
    all_classes: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AttackMethod {
    /// Distinguishing inputs against the locked netlist.
    Di,
    /// Oracle-only candidate elimination.
    Hypothesis,
}

#[derive(Debug, Args)]
struct AttackArgs {
    /// Bundle whose resolved design serves as the oracle.
    #[arg(long, conflicts_with = "verilog")]
    bundle: Option<PathBuf>,
    /// Locked Verilog to attack; needs --oracle-cmd.
    #[arg(long, requires = "oracle_cmd")]
    verilog: Option<PathBuf>,
    /// Program speaking the line protocol.
    #[arg(long)]
    oracle_cmd: Option<String>,
    #[arg(long = "oracle-arg", allow_hyphen_values = true)]
    oracle_args: Vec<String>,
    #[arg(long, value_enum, default_value_t = AttackMethod::Di)]
    method: AttackMethod,
    /// File with one candidate polynomial per line; defaults to every
    /// irreducible polynomial of the degree (m <= 20).
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    max_queries: u64,
    #[arg(long, default_value_t = 60.0)]
    timeout_secs: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    m: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    k: Vec<usize>,
    #[arg(long, default_value = "tri_penta")]
    filter: String,
    #[arg(long)]
    no_optimize: bool,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OrdersArgs {
    config: PathBuf,
    /// Sample this many random orders instead of all permutations.
    #[arg(long)]
    sample: Option<usize>,
    /// Sampling seed; defaults to the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 40_320)]
    budget: u128,
    #[arg(long, default_value_t = 8)]
    max_others: usize,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Serve multiplication modulo this polynomial.
    #[arg(long, conflicts_with_all = ["verilog", "bundle"])]
    poly: Option<String>,
    /// Serve a Verilog design.
    #[arg(long, conflicts_with = "bundle")]
    verilog: Option<PathBuf>,
    /// Key for a locked design, `p1` first.
    #[arg(long, requires = "verilog")]
    key: Option<String>,
    /// Serve the resolved design of a bundle.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    /// Verification mismatch or failed attack.
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Polys(a) => commands::polys(a),
        Command::Build(a) => commands::build(a),
        Command::Verify(a) => commands::verify(a),
        Command::Attack(a) => commands::attack(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Orders(a) => commands::orders(a),
        Command::Oracle(a) => commands::oracle(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
