//! Terminal-side card emulator forwarding reader traffic over a frame link.
//!
//! Field activation and deactivation are control calls on the emulator; the
//! simulator has no radio layer. The same type also serves as the reader-side
//! end of a plain remote card link when built with a zero-delay model.

use thiserror::Error;

use super::frame::{ErrorReason, FrameKind, WireFrame};
use super::latency::{DelaySample, DelaySampler, LatencyModel};
use super::relay_app::SessionState;
use super::transport::{unexpected, FrameHandler, FrameTransport, TransportError};
use crate::card::{CardError, CardInterface, Exchange, TimingMode};

#[derive(Debug, Error)]
pub enum RelayError {
    #[error("no relay app attached")]
    NoRelay,
    #[error("session refused: {message}")]
    Refused { reason: Option<ErrorReason>, message: String },
    #[error("no open session")]
    NotOpen,
    #[error("relay link failed: {0}")]
    Transport(#[from] TransportError),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl RelayError {
    fn refused(frame: &WireFrame) -> Self {
        let (reason, detail) = frame.error_details().unwrap_or((None, String::new()));
        let message = match reason {
            Some(r) if detail.is_empty() => r.to_string(),
            Some(r) => format!("{r} ({detail})"),
            None => detail,
        };
        Self::Refused { reason, message }
    }

    pub fn reason(&self) -> Option<ErrorReason> {
        match self {
            Self::Refused { reason, .. } => *reason,
            _ => None,
        }
    }
}

/// Outcome of one injected frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Injected {
    pub reply: WireFrame,
    pub delay: DelaySample,
    pub elapsed_ms: f64,
}

pub struct CardEmulator<T> {
    link: Option<T>,
    state: SessionState,
    sampler: DelaySampler,
    timing: TimingMode,
    ceiling_ms: Option<f64>,
}

impl<T: FrameTransport> CardEmulator<T> {
    pub fn new(link: T, model: LatencyModel, seed: u64) -> Self {
        Self { link: Some(link), ..Self::detached(model, seed) }
    }

    /// An emulator waiting for a relay app to connect.
    pub fn detached(model: LatencyModel, seed: u64) -> Self {
        Self {
            link: None,
            state: SessionState::Idle,
            sampler: DelaySampler::new(model, seed),
            timing: TimingMode::Simulated,
            ceiling_ms: None,
        }
    }

    pub fn timing(mut self, timing: TimingMode) -> Self {
        self.timing = timing;
        self
    }

    /// Round trips above `ms` are reported as a relay timeout.
    pub fn ceiling(mut self, ms: Option<f64>) -> Self {
        self.ceiling_ms = ms;
        self
    }

    /// Attaches a new relay link; the previous session, if any, is forgotten.
    pub fn attach(&mut self, link: T) {
        self.link = Some(link);
        self.state = SessionState::Idle;
    }

    pub fn detach(&mut self) -> Option<T> {
        self.state = SessionState::Idle;
        self.link.take()
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn link(&self) -> Option<&T> {
        self.link.as_ref()
    }

    pub fn link_mut(&mut self) -> Option<&mut T> {
        self.link.as_mut()
    }

    /// Field on: opens the remote session.
    pub fn activate(&mut self) -> Result<(), RelayError> {
        if self.state == SessionState::Open {
            return Err(RelayError::Protocol("field already active".into()));
        }
        let link = self.link.as_mut().ok_or(RelayError::NoRelay)?;
        let reply = link.exchange(&WireFrame::session_open()).inspect_err(|_| {
            self.state = SessionState::Closed;
        })?;
        match reply.kind {
            FrameKind::SessionOpen => {
                self.state = SessionState::Open;
                Ok(())
            }
            FrameKind::Error => {
                self.state = SessionState::Closed;
                Err(RelayError::refused(&reply))
            }
            other => {
                self.state = SessionState::Closed;
                Err(RelayError::Protocol(format!("{other:?} in reply to SessionOpen")))
            }
        }
    }

    /// Field off: closes the remote session. A no-op unless a session is open.
    pub fn deactivate(&mut self) -> Result<(), RelayError> {
        if self.state != SessionState::Open {
            return Ok(());
        }
        self.state = SessionState::Closed;
        let link = self.link.as_mut().ok_or(RelayError::NoRelay)?;
        match link.exchange(&WireFrame::session_close())?.kind {
            FrameKind::SessionClose => Ok(()),
            other => Err(RelayError::Protocol(format!("{other:?} in reply to SessionClose"))),
        }
    }

    /// Sends one frame and applies the next sampled delay to the round trip.
    /// Exceeding the ceiling replaces the reply with a `Timeout` error frame.
    pub fn inject(&mut self, frame: &WireFrame) -> Result<Injected, RelayError> {
        if self.state != SessionState::Open {
            return Err(RelayError::NotOpen);
        }
        let link = self.link.as_mut().ok_or(RelayError::NoRelay)?;
        let delay = self.sampler.next_sample();
        let (reply, elapsed_ms) = self.timing.apply(delay, || link.exchange(frame));
        let reply = match reply {
            Ok(reply) => reply,
            Err(err) => {
                self.state = SessionState::Closed;
                return Err(err.into());
            }
        };
        let reply = match self.ceiling_ms {
            Some(limit) if elapsed_ms > limit => {
                WireFrame::error(ErrorReason::Timeout, &format!("{elapsed_ms:.1} ms > {limit} ms"))
            }
            _ => reply,
        };
        Ok(Injected { reply, delay, elapsed_ms })
    }
}

impl<T: FrameTransport> CardInterface for CardEmulator<T> {
    fn transceive(&mut self, command: &[u8]) -> Result<Exchange, CardError> {
        let injected = match self.inject(&WireFrame::capdu(command)) {
            Ok(injected) => injected,
            Err(err) => return Err(CardError::Removed(err.to_string())),
        };
        match injected.reply.kind {
            FrameKind::RApdu => Ok(Exchange {
                response: injected.reply.payload,
                elapsed_ms: injected.elapsed_ms,
                relay_ms: injected.delay.added_ms,
            }),
            _ => {
                let detail = RelayError::refused(&injected.reply);
                Err(CardError::Removed(detail.to_string()))
            }
        }
    }
}

/// Terminal-facing side: a remote reader drives the emulator with frames,
/// `SessionOpen` and `SessionClose` standing for field on and off.
impl<T: FrameTransport> FrameHandler for CardEmulator<T> {
    fn handle(&mut self, frame: &WireFrame) -> WireFrame {
        match frame.kind {
            FrameKind::SessionOpen => match self.activate() {
                Ok(()) => WireFrame::session_open(),
                Err(err) => WireFrame::error(
                    err.reason().unwrap_or(ErrorReason::RelayUnavailable),
                    &err.to_string(),
                ),
            },
            FrameKind::CApdu => match self.inject(frame) {
                Ok(injected) => injected.reply,
                Err(RelayError::NotOpen) => WireFrame::error(ErrorReason::NotOpen, ""),
                Err(err) => WireFrame::error(ErrorReason::RelayUnavailable, &err.to_string()),
            },
            FrameKind::SessionClose => {
                let _ = self.deactivate();
                self.state = SessionState::Closed;
                WireFrame::session_close()
            }
            _ => unexpected(frame),
        }
    }

    fn transport_lost(&mut self) {
        let _ = self.deactivate();
        self.state = SessionState::Closed;
    }

    fn session_ended(&self) -> bool {
        self.state == SessionState::Closed
    }
}
