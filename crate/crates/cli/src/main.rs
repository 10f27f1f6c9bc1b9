//! `relaysim`: runs the direct and relayed payment scenarios, the standalone
//! relay endpoints, the delay benchmark and an APDU/TLV decoder.

mod bench;
mod config;
mod decode;
mod endpoints;
mod output;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Why a command did not succeed. Usage problems exit with 2, everything
/// else with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn runtime(err: impl std::fmt::Display) -> Self {
        Self::Runtime(err.to_string())
    }
}

#[derive(Parser)]
#[command(name = "relaysim", version, about = "Software relay attacks on secure-element payments, simulated")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Terminal transaction against an in-process secure element, or a remote card.
    PosDirect(scenarios::PosDirectArgs),
    /// Terminal, card emulator and relay app wired together; the attack end to end.
    RelayAttack(scenarios::RelayAttackArgs),
    /// Serves a secure element's contactless interface over TCP.
    SeHost(endpoints::SeHostArgs),
    /// Card emulator: terminal-facing listener relaying to a relay app.
    Emulator(endpoints::EmulatorArgs),
    /// Relay app: connects to an emulator and drives the internal interface.
    RelayApp(endpoints::RelayAppArgs),
    /// Command/response delay histograms per access path.
    Bench(bench::BenchArgs),
    /// Pretty-prints a hex C-APDU, R-APDU or TLV string.
    Decode(decode::DecodeArgs),
}

/// Flags shared by the transaction scenarios.
#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Scenario configuration file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw; drawn from the OS when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Transaction ceiling enforced by the terminal.
    #[arg(long)]
    pub timeout_ms: Option<f64>,
    /// Fixed unpredictable number (8 hex digits) instead of the seeded one.
    #[arg(long)]
    pub un: Option<String>,
    /// Directory for report.json, run.json and trace.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Tcp,
    Pipe,
}

/// The given seed, or a fresh one from the OS.
pub fn resolve_seed(flag: Option<u64>, configured: Option<u64>) -> u64 {
    flag.or(configured).unwrap_or_else(|| {
        let seed = rand::random();
        eprintln!("seed {seed} (from entropy)");
        seed
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::PosDirect(args) => scenarios::pos_direct(&args),
        Command::RelayAttack(args) => scenarios::relay_attack(&args),
        Command::SeHost(args) => endpoints::se_host(&args),
        Command::Emulator(args) => endpoints::emulator(&args),
        Command::RelayApp(args) => endpoints::relay_app(&args),
        Command::Bench(args) => bench::bench(&args),
        Command::Decode(args) => decode::decode(&args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
