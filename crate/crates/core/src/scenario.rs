//! End-to-end runs: a terminal against the secure element directly, or through
//! the relay with its three roles wired over TCP loopback or an in-process
//! pipe.

use std::io;
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use serde::Serialize;

use crate::card::{DirectCard, TimingMode};
use crate::relay::{
    serve_connection, CardEmulator, ErrorReason, FrameTransport, InProcessLink, LatencyModel,
    RelayApp, RelayAppConfig, StreamTransport,
};
use crate::se::{ChannelOrigin, SeConfig, SecureElement};
use crate::terminal::{run_transaction, TerminalConfig, TransactionReport};

/// Upper bound on any single socket wait in loopback runs.
const SOCKET_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Tcp,
    Pipe,
}

/// Secure-element state around a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeSnapshot {
    pub wallet_locked: bool,
    pub atc: u16,
    pub pin_tries_left: u8,
}

impl SeSnapshot {
    pub fn of(se: &SecureElement) -> Self {
        Self { wallet_locked: se.wallet_locked(), atc: se.atc(), pin_tries_left: se.pin_tries_left() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectRun {
    pub origin: ChannelOrigin,
    /// Status of the local unlock, when one was attempted.
    pub unlock_sw: Option<String>,
    pub before: SeSnapshot,
    pub after: SeSnapshot,
    pub report: TransactionReport,
}

/// Terminal against the secure element over `origin`. With `unlock`, the
/// wallet is first unlocked locally as its owner would.
pub fn run_direct(
    se: &mut SecureElement,
    origin: ChannelOrigin,
    unlock: Option<Option<&str>>,
    terminal: &TerminalConfig,
) -> DirectRun {
    let unlock_sw = unlock.map(|pin| se.unlock_locally(pin).to_string());
    let before = SeSnapshot::of(se);
    se.open_session(origin);
    let report = run_transaction(&mut DirectCard::new(se, origin, terminal.seed), terminal);
    se.close_session(origin);
    DirectRun { origin, unlock_sw, before, after: SeSnapshot::of(se), report }
}

#[derive(Debug, Clone)]
pub struct RelaySetup {
    pub se: SeConfig,
    pub relay: RelayAppConfig,
    pub model: LatencyModel,
    pub terminal: TerminalConfig,
    pub link: LinkKind,
    /// Emulator-side ceiling per relayed round trip.
    pub ceiling_ms: Option<f64>,
    pub timing: TimingMode,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionRefusal {
    pub reason: Option<ErrorReason>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelayRun {
    pub link: LinkKind,
    pub before: SeSnapshot,
    pub after: SeSnapshot,
    /// Set when the relay app refused the session; no transaction ran.
    pub refused: Option<SessionRefusal>,
    pub report: Option<TransactionReport>,
    /// C-APDUs the relay app forwarded to the secure element.
    pub relayed_commands: u64,
}

impl RelayRun {
    pub fn approved(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.outcome.is_approved())
    }

    pub fn refusal_reason(&self) -> Option<ErrorReason> {
        self.refused.as_ref()?.reason
    }
}

/// Field on, one transaction, field off.
fn drive<T: FrameTransport>(
    emulator: &mut CardEmulator<T>,
    terminal: &TerminalConfig,
) -> (Option<SessionRefusal>, Option<TransactionReport>) {
    if let Err(err) = emulator.activate() {
        return (Some(SessionRefusal { reason: err.reason(), message: err.to_string() }), None);
    }
    let report = run_transaction(emulator, terminal);
    // a transport already gone was handled as a close on the far side
    let _ = emulator.deactivate();
    (None, Some(report))
}

/// Relay app, card emulator and terminal run against a fresh secure element.
pub fn run_relay(setup: &RelaySetup) -> io::Result<RelayRun> {
    let se = SecureElement::new(setup.se.clone())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    run_relay_with(se, setup).map(|(run, _)| run)
}

/// Like [`run_relay`] on a caller-supplied secure element, which is handed
/// back afterwards.
pub fn run_relay_with(se: SecureElement, setup: &RelaySetup) -> io::Result<(RelayRun, SecureElement)> {
    let before = SeSnapshot::of(&se);
    let app = RelayApp::new(se, setup.relay.clone());
    let seed = setup.terminal.seed;
    let (refused, report, app) = match setup.link {
        LinkKind::Pipe => {
            let mut emulator = CardEmulator::new(InProcessLink::new(app), setup.model.clone(), seed)
                .timing(setup.timing)
                .ceiling(setup.ceiling_ms);
            let (refused, report) = drive(&mut emulator, &setup.terminal);
            let app = emulator.detach().expect("link attached").into_handler();
            (refused, report, app)
        }
        LinkKind::Tcp => {
            let listener = TcpListener::bind(("127.0.0.1", 0))?;
            let addr = listener.local_addr()?;
            let relay = thread::spawn(move || -> io::Result<RelayApp> {
                let mut app = app;
                let mut stream = TcpStream::connect(addr)?;
                stream.set_read_timeout(Some(SOCKET_TIMEOUT))?;
                stream.set_nodelay(true)?;
                // errors surface as a lost transport, which locks the wallet
                let _ = serve_connection(&mut app, &mut stream);
                Ok(app)
            });
            let (stream, _) = listener.accept()?;
            stream.set_read_timeout(Some(SOCKET_TIMEOUT))?;
            stream.set_nodelay(true)?;
            let mut emulator = CardEmulator::new(StreamTransport::new(stream), setup.model.clone(), seed)
                .timing(setup.timing)
                .ceiling(setup.ceiling_ms);
            let (refused, report) = drive(&mut emulator, &setup.terminal);
            drop(emulator);
            let app = relay.join().map_err(|_| io::Error::other("relay app thread panicked"))??;
            (refused, report, app)
        }
    };
    let relayed_commands = app.relayed();
    let se = app.into_se();
    let run = RelayRun { link: setup.link, before, after: SeSnapshot::of(&se), refused, report, relayed_commands };
    Ok((run, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relay::AccessPath;

    fn setup(link: LinkKind) -> RelaySetup {
        RelaySetup {
            se: SeConfig::default(),
            relay: RelayAppConfig::default(),
            model: LatencyModel::for_path(AccessPath::RelayWifi),
            terminal: TerminalConfig::with_seed(11),
            link,
            ceiling_ms: None,
            timing: TimingMode::Simulated,
        }
    }

    #[test]
    fn both_links_give_the_same_report() {
        let pipe = run_relay(&setup(LinkKind::Pipe)).unwrap();
        let tcp = run_relay(&setup(LinkKind::Tcp)).unwrap();
        assert!(pipe.approved());
        assert_eq!(pipe.report, tcp.report);
        assert_eq!(pipe.after, tcp.after);
        assert!(tcp.after.wallet_locked);
        assert_eq!(tcp.after.atc, tcp.before.atc + 1);
        assert_eq!(tcp.relayed_commands, 5);
    }

    #[test]
    fn refusal_is_reported() {
        let mut s = setup(LinkKind::Tcp);
        s.se.policy.require_pin_on_card = true;
        let run = run_relay(&s).unwrap();
        assert_eq!(run.refusal_reason(), Some(ErrorReason::UnlockFailed));
        assert!(run.report.is_none());
        assert!(run.after.wallet_locked);
    }

    #[test]
    fn direct_runs() {
        let mut se = SecureElement::default();
        let run = run_direct(&mut se, ChannelOrigin::Internal, Some(None), &TerminalConfig::with_seed(11));
        assert!(run.report.outcome.is_approved());
        assert_eq!(run.unlock_sw.as_deref(), Some("9000"));
        assert_eq!(run.after.atc, 1);

        let mut se = SecureElement::default();
        let run = run_direct(&mut se, ChannelOrigin::Contactless, None, &TerminalConfig::default());
        assert_eq!(run.report.outcome.declined_sw(), Some(0x6985));
    }
}
