//! `pos-direct` and `relay-attack`.

use std::net::TcpStream;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use relaysim::card::TimingMode;
use relaysim::relay::{AccessPath, CardEmulator, LatencyModel, RelayAppConfig, StreamTransport};
use relaysim::scenario::{run_direct, run_relay, LinkKind, RelaySetup};
use relaysim::terminal::{run_transaction, TerminalConfig, TransactionReport};
use relaysim::{ChannelOrigin, SeConfig, SecureElement};
use serde::Serialize;

use crate::config::{parse_path, parse_un, ScenarioConfig};
use crate::output::{json, write_files};
use crate::{resolve_seed, CommonArgs, Failure, Transport};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Internal,
    Contactless,
}

#[derive(Args, Debug)]
pub struct PosDirectArgs {
    /// Interface the terminal reaches the secure element through.
    #[arg(long, value_enum, default_value_t = Origin::Internal)]
    origin: Origin,
    /// Skip the owner's local unlock before the transaction.
    #[arg(long)]
    no_unlock: bool,
    /// PIN used for the local unlock; defaults to the configured wallet PIN.
    #[arg(long)]
    pin: Option<String>,
    /// Run against a remote card (se-host or emulator terminal listener).
    #[arg(long, value_name = "ADDR")]
    connect: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct RelayAttackArgs {
    /// Latency model between emulator and relay app.
    #[arg(long, value_name = "PATH")]
    model: Option<String>,
    #[arg(long, value_enum, default_value_t = Transport::Tcp)]
    transport: Transport,
    /// Countermeasure: the on-card component checks the wallet PIN itself.
    #[arg(long)]
    pin_on_card: bool,
    /// Countermeasure: the payment applet refuses the internal interface.
    #[arg(long)]
    internal_disable: bool,
    /// Countermeasure: the OS denies the relay app secure-element access.
    #[arg(long)]
    deny_access: bool,
    /// PIN known to the relay app.
    #[arg(long)]
    pin: Option<String>,
    /// Emulator-side ceiling per relayed round trip.
    #[arg(long)]
    ceiling_ms: Option<f64>,
    /// Sleep for injected delays instead of accounting for them.
    #[arg(long)]
    realtime: bool,
    #[command(flatten)]
    common: CommonArgs,
}

/// Terminal settings and output directory shared by both scenarios.
struct Prepared {
    config: ScenarioConfig,
    se: SeConfig,
    terminal: TerminalConfig,
    out: Option<PathBuf>,
}

fn prepare(common: &CommonArgs) -> Result<Prepared, Failure> {
    let (config, se) = ScenarioConfig::load(common.config.as_deref())?;
    let un = common.un.as_deref().or(config.un.as_deref()).map(parse_un).transpose()?;
    let terminal = TerminalConfig {
        timeout_ms: common.timeout_ms.or(config.timeout_ms),
        un_override: un,
        ..TerminalConfig::with_seed(resolve_seed(common.seed, config.seed))
    };
    terminal.validate().map_err(Failure::Usage)?;
    let out = common.out.clone().or_else(|| config.out.clone());
    Ok(Prepared { config, se, terminal, out })
}

fn report_files(report: &TransactionReport, run: String) -> Vec<(&'static str, String)> {
    vec![("report.json", report.to_json()), ("trace.txt", report.trace()), ("run.json", run)]
}

pub fn pos_direct(args: &PosDirectArgs) -> Result<bool, Failure> {
    let p = prepare(&args.common)?;
    if let Some(addr) = args.connect.as_deref() {
        return pos_remote(addr, &p);
    }
    let origin = match args.origin {
        Origin::Internal => ChannelOrigin::Internal,
        Origin::Contactless => ChannelOrigin::Contactless,
    };
    let mut se = SecureElement::new(p.se.clone()).map_err(|e| Failure::Usage(e.to_string()))?;
    let pin = args.pin.clone().unwrap_or_else(|| p.se.wallet.pin.clone());
    let unlock = (!args.no_unlock).then_some(Some(pin.as_str()));
    let run = run_direct(&mut se, origin, unlock, &p.terminal);
    print!("{}", run.report.trace());
    if let Some(dir) = &p.out {
        write_files(dir, &report_files(&run.report, json(&run)))?;
    }
    Ok(run.report.outcome.is_approved())
}

#[derive(Serialize)]
struct RemoteRun<'a> {
    card: &'a str,
    refused: Option<String>,
    report: Option<&'a TransactionReport>,
}

/// Terminal over TCP; timings are measured wall-clock.
fn pos_remote(addr: &str, p: &Prepared) -> Result<bool, Failure> {
    let stream = TcpStream::connect(addr).map_err(|e| Failure::Runtime(format!("connect {addr}: {e}")))?;
    stream.set_nodelay(true).map_err(Failure::runtime)?;
    let mut card = CardEmulator::new(StreamTransport::new(stream), LatencyModel::zero(), p.terminal.seed)
        .timing(TimingMode::Realtime);
    if let Err(err) = card.activate() {
        println!("card refused the session: {err}");
        let run = RemoteRun { card: addr, refused: Some(err.to_string()), report: None };
        if let Some(dir) = &p.out {
            write_files(dir, &[("run.json", json(&run))])?;
        }
        return Ok(false);
    }
    let report = run_transaction(&mut card, &p.terminal);
    let _ = card.deactivate();
    print!("{}", report.trace());
    if let Some(dir) = &p.out {
        let run = RemoteRun { card: addr, refused: None, report: Some(&report) };
        write_files(dir, &report_files(&report, json(&run)))?;
    }
    Ok(report.outcome.is_approved())
}

pub fn relay_attack(args: &RelayAttackArgs) -> Result<bool, Failure> {
    let p = prepare(&args.common)?;
    let path = match args.model.as_deref() {
        Some(text) => parse_path(text)?,
        None => p.config.model()?.unwrap_or(AccessPath::RelayWifi),
    };
    let model = LatencyModel::with_params(path, p.config.latency()).map_err(|e| Failure::Usage(e.to_string()))?;

    let mut se = p.se.clone();
    se.policy.require_pin_on_card |= args.pin_on_card;
    if args.internal_disable {
        se.policy.internal_disabled_aids.insert(se.payment.aid.clone());
    }
    let relay = RelayAppConfig {
        access_granted: !args.deny_access && p.config.relay.access_granted.unwrap_or(true),
        pin: args.pin.clone().or_else(|| p.config.relay.pin.clone()),
        ..RelayAppConfig::default()
    };
    let ceiling_ms = args.ceiling_ms.or(p.config.ceiling_ms);
    if ceiling_ms.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
        return Err(Failure::Usage("--ceiling-ms must be positive".into()));
    }
    let setup = RelaySetup {
        se,
        relay,
        model,
        terminal: p.terminal.clone(),
        link: match args.transport {
            Transport::Tcp => LinkKind::Tcp,
            Transport::Pipe => LinkKind::Pipe,
        },
        ceiling_ms,
        timing: if args.realtime { TimingMode::Realtime } else { TimingMode::Simulated },
    };
    let run = run_relay(&setup).map_err(|e| Failure::Runtime(format!("relay setup: {e}")))?;

    match (&run.refused, &run.report) {
        (Some(refusal), _) => {
            let text = format!("{}\nwallet locked: {}\n", refusal.message, run.after.wallet_locked);
            print!("{text}");
            if let Some(dir) = &p.out {
                write_files(dir, &[("run.json", json(&run)), ("trace.txt", text)])?;
            }
        }
        (None, Some(report)) => {
            print!("{}", report.trace());
            println!("{:<14}{}", "relayed:", run.relayed_commands);
            println!("wallet locked: {}", run.after.wallet_locked);
            if let Some(dir) = &p.out {
                write_files(dir, &report_files(report, json(&run)))?;
            }
        }
        (None, None) => unreachable!("a run either refuses or reports"),
    }
    Ok(run.approved())
}
