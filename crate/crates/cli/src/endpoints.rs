//! Standalone endpoints for running the roles as separate processes.
//!
//! ```text
//! relaysim emulator --relay-listen 127.0.0.1:7101 --terminal-listen 127.0.0.1:7102 &
//! relaysim relay-app --connect 127.0.0.1:7101 &
//! relaysim pos-direct --connect 127.0.0.1:7102
//! ```
//!
//! Each listener prints `listening <role> <addr>` on stderr once bound, so
//! port 0 can be used.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use clap::Args;
use relaysim::card::TimingMode;
use relaysim::relay::{
    serve_connection, AccessPath, CardEmulator, FrameHandler, LatencyModel, RelayApp, RelayAppConfig, SeHost,
    StreamTransport,
};
use relaysim::scenario::SeSnapshot;
use relaysim::SecureElement;

use crate::config::{parse_path, ScenarioConfig};
use crate::{resolve_seed, Failure};

const DEFAULT_SE_HOST: &str = "127.0.0.1:7100";
const DEFAULT_RELAY: &str = "127.0.0.1:7101";
const DEFAULT_TERMINAL: &str = "127.0.0.1:7102";
/// How long `relay-app` keeps retrying a refused connection.
const CONNECT_PATIENCE: Duration = Duration::from_secs(10);

#[derive(Args, Debug)]
pub struct SeHostArgs {
    #[arg(long, value_name = "ADDR")]
    listen: Option<String>,
    /// Unlock the wallet locally before serving, as its owner would.
    #[arg(long)]
    unlock: bool,
    /// Sessions to serve before exiting; 0 serves until killed.
    #[arg(long, default_value_t = 1)]
    sessions: u32,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EmulatorArgs {
    /// Where the relay app connects.
    #[arg(long, value_name = "ADDR")]
    relay_listen: Option<String>,
    /// Where the terminal connects.
    #[arg(long, value_name = "ADDR")]
    terminal_listen: Option<String>,
    #[arg(long, value_name = "PATH")]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ceiling_ms: Option<f64>,
    #[arg(long, default_value_t = 1)]
    sessions: u32,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RelayAppArgs {
    /// The emulator's relay listener.
    #[arg(long, value_name = "ADDR")]
    connect: Option<String>,
    /// PIN known to the relay app.
    #[arg(long)]
    pin: Option<String>,
    #[arg(long)]
    deny_access: bool,
    #[arg(long, default_value_t = 1)]
    sessions: u32,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn bind(role: &str, addr: &str) -> Result<TcpListener, Failure> {
    let listener = TcpListener::bind(addr).map_err(|e| Failure::Runtime(format!("bind {addr}: {e}")))?;
    let local = listener.local_addr().map_err(Failure::runtime)?;
    eprintln!("listening {role} {local}");
    Ok(listener)
}

fn accept(listener: &TcpListener) -> Result<(TcpStream, SocketAddr), Failure> {
    let (stream, peer) = listener.accept().map_err(Failure::runtime)?;
    stream.set_nodelay(true).map_err(Failure::runtime)?;
    Ok((stream, peer))
}

/// Session indices to serve; unbounded for 0.
fn sessions(n: u32) -> impl Iterator<Item = u32> {
    (0..).take_while(move |&i| n == 0 || i < n)
}

fn print_snapshot(se: &SecureElement) {
    let s = SeSnapshot::of(se);
    println!("wallet_locked={} atc={} pin_tries_left={}", s.wallet_locked, s.atc, s.pin_tries_left);
}

pub fn se_host(args: &SeHostArgs) -> Result<bool, Failure> {
    let (config, se_config) = ScenarioConfig::load(args.config.as_deref())?;
    let addr = args.listen.clone().or(config.endpoints.se_host).unwrap_or_else(|| DEFAULT_SE_HOST.into());
    let mut se = SecureElement::new(se_config.clone()).map_err(|e| Failure::Usage(e.to_string()))?;
    if args.unlock {
        let sw = se.unlock_locally(Some(&se_config.wallet.pin));
        eprintln!("local unlock {sw}");
    }
    let mut host = SeHost::new(se);
    let listener = bind("se-host", &addr)?;
    for _ in sessions(args.sessions) {
        let (mut stream, peer) = accept(&listener)?;
        let outcome = serve_connection(&mut host, &mut stream);
        eprintln!("session from {peer}: {outcome:?}");
        host.reset();
    }
    print_snapshot(host.se());
    Ok(true)
}

pub fn emulator(args: &EmulatorArgs) -> Result<bool, Failure> {
    let (config, _) = ScenarioConfig::load(args.config.as_deref())?;
    let path = match args.model.as_deref().map(parse_path).transpose()? {
        Some(path) => path,
        None => config.model()?.unwrap_or(AccessPath::RelayWifi),
    };
    let model = LatencyModel::with_params(path, config.latency()).map_err(|e| Failure::Usage(e.to_string()))?;
    let seed = resolve_seed(args.seed, config.seed);
    let ceiling = args.ceiling_ms.or(config.ceiling_ms);
    let relay_addr = args.relay_listen.clone().or(config.endpoints.relay).unwrap_or_else(|| DEFAULT_RELAY.into());
    let terminal_addr =
        args.terminal_listen.clone().or(config.endpoints.terminal).unwrap_or_else(|| DEFAULT_TERMINAL.into());
    let relay_listener = bind("relay", &relay_addr)?;
    let terminal_listener = bind("terminal", &terminal_addr)?;

    let mut ok = true;
    for i in sessions(args.sessions) {
        let (relay, relay_peer) = accept(&relay_listener)?;
        let (mut terminal, terminal_peer) = accept(&terminal_listener)?;
        // injected delays are real sleeps here: the terminal measures wall-clock
        let mut emulator = CardEmulator::new(StreamTransport::new(relay), model.clone(), seed.wrapping_add(i.into()))
            .timing(TimingMode::Realtime)
            .ceiling(ceiling);
        let outcome = serve_connection(&mut emulator, &mut terminal);
        eprintln!("session {i}: terminal {terminal_peer}, relay {relay_peer}: {outcome:?}");
        ok &= outcome.is_ok();
        emulator.transport_lost();
    }
    Ok(ok)
}

fn connect_patiently(addr: &str) -> Result<TcpStream, Failure> {
    let start = Instant::now();
    loop {
        match TcpStream::connect(addr) {
            Ok(stream) => {
                stream.set_nodelay(true).map_err(Failure::runtime)?;
                return Ok(stream);
            }
            Err(e) if start.elapsed() > CONNECT_PATIENCE => {
                return Err(Failure::Runtime(format!("connect {addr}: {e}")));
            }
            Err(_) => thread::sleep(Duration::from_millis(50)),
        }
    }
}

pub fn relay_app(args: &RelayAppArgs) -> Result<bool, Failure> {
    let (config, se_config) = ScenarioConfig::load(args.config.as_deref())?;
    let addr = args.connect.clone().or(config.endpoints.relay).unwrap_or_else(|| DEFAULT_RELAY.into());
    let se = SecureElement::new(se_config).map_err(|e| Failure::Usage(e.to_string()))?;
    let relay_config = RelayAppConfig {
        access_granted: !args.deny_access && config.relay.access_granted.unwrap_or(true),
        pin: args.pin.clone().or(config.relay.pin),
        ..RelayAppConfig::default()
    };
    let mut app = RelayApp::new(se, relay_config);
    for i in sessions(args.sessions) {
        let mut stream = connect_patiently(&addr)?;
        let outcome = serve_connection(&mut app, &mut stream);
        eprintln!("session {i}: {outcome:?}, relayed {} so far", app.relayed());
        app.reset();
    }
    print_snapshot(app.se());
    Ok(true)
}
