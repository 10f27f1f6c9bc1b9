//! Phone-side relay endpoint bridging the internal secure-element channel to
//! the network.

use serde::{Deserialize, Serialize};

use super::frame::{ErrorReason, FrameKind, WireFrame};
use super::transport::{unexpected, FrameHandler};
use crate::aid::Aid;
use crate::apdu::{CommandApdu, StatusWord};
use crate::se::{commands, ChannelOrigin, SecureElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Idle,
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayAppConfig {
    /// Outcome of the OS permission gate on secure-element access.
    pub access_granted: bool,
    /// PIN sent before unlocking; `None` when the attacker does not know it.
    pub pin: Option<String>,
    /// Payment applet probed before unlocking.
    pub target_aid: Aid,
}

impl Default for RelayAppConfig {
    fn default() -> Self {
        Self { access_granted: true, pin: None, target_aid: Aid::prepaid_card() }
    }
}

/// Serves one session per connection. Owns the secure element so that a
/// single object carries the lock invariant.
#[derive(Debug)]
pub struct RelayApp {
    se: SecureElement,
    config: RelayAppConfig,
    state: SessionState,
    relayed: u64,
}

impl RelayApp {
    pub fn new(se: SecureElement, config: RelayAppConfig) -> Self {
        Self { se, config, state: SessionState::Idle, relayed: 0 }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn se(&self) -> &SecureElement {
        &self.se
    }

    pub fn into_se(self) -> SecureElement {
        self.se
    }

    /// C-APDUs forwarded so far, over all sessions.
    pub fn relayed(&self) -> u64 {
        self.relayed
    }

    /// Prepares for the next connection.
    pub fn reset(&mut self) {
        if self.state == SessionState::Open {
            self.teardown();
        }
        self.state = SessionState::Idle;
    }

    fn send(&mut self, cmd: &CommandApdu) -> StatusWord {
        self.se.process(ChannelOrigin::Internal, cmd).sw
    }

    fn open(&mut self) -> WireFrame {
        if !self.config.access_granted {
            self.state = SessionState::Closed;
            return WireFrame::error(ErrorReason::AccessDenied, "secure element access not granted");
        }
        self.se.open_session(ChannelOrigin::Internal);
        let sw = self.send(&commands::select_wallet());
        if !sw.is_success() {
            return self.refuse(ErrorReason::UnlockFailed, &format!("wallet component select {sw}"));
        }
        // 6A82 here means the applet is closed to this interface; anything
        // else (6985 while locked) means it is reachable once unlocked.
        let sw = self.send(&CommandApdu::select(self.config.target_aid.as_bytes()));
        if sw == StatusWord::FILE_NOT_FOUND {
            return self.refuse(ErrorReason::InterfaceDisabled, &format!("payment applet select {sw}"));
        }
        self.send(&commands::select_wallet());
        if let Some(pin) = self.config.pin.clone() {
            let sw = self.send(&commands::verify_pin(&pin));
            if !sw.is_success() && sw != StatusWord::INS_NOT_SUPPORTED {
                return self.refuse(ErrorReason::UnlockFailed, &format!("verify {sw}"));
            }
        }
        let sw = self.send(&commands::unlock());
        if !sw.is_success() {
            return self.refuse(ErrorReason::UnlockFailed, &format!("unlock {sw}"));
        }
        self.state = SessionState::Open;
        WireFrame::session_open()
    }

    fn refuse(&mut self, reason: ErrorReason, detail: &str) -> WireFrame {
        self.teardown();
        WireFrame::error(reason, detail)
    }

    fn teardown(&mut self) {
        self.send(&commands::select_wallet());
        self.send(&commands::lock());
        self.se.close_session(ChannelOrigin::Internal);
        self.state = SessionState::Closed;
    }
}

impl FrameHandler for RelayApp {
    fn handle(&mut self, frame: &WireFrame) -> WireFrame {
        match (frame.kind, self.state) {
            (FrameKind::SessionOpen, SessionState::Idle) => self.open(),
            (FrameKind::SessionOpen, _) => {
                WireFrame::error(ErrorReason::Protocol, "one session per connection")
            }
            (FrameKind::CApdu, SessionState::Open) => {
                self.relayed += 1;
                WireFrame::rapdu(self.se.transmit(ChannelOrigin::Internal, &frame.payload))
            }
            (FrameKind::CApdu, _) => WireFrame::error(ErrorReason::NotOpen, ""),
            (FrameKind::SessionClose, state) => {
                if state == SessionState::Open {
                    self.teardown();
                }
                self.state = SessionState::Closed;
                WireFrame::session_close()
            }
            _ => unexpected(frame),
        }
    }

    fn transport_lost(&mut self) {
        if self.state == SessionState::Open {
            self.teardown();
        }
        self.state = SessionState::Closed;
    }

    fn session_ended(&self) -> bool {
        self.state == SessionState::Closed
    }
}

/// Exposes the contactless interface of a secure element over frames, standing
/// in for an external reader's radio link.
#[derive(Debug)]
pub struct SeHost {
    se: SecureElement,
    state: SessionState,
}

impl SeHost {
    pub fn new(se: SecureElement) -> Self {
        Self { se, state: SessionState::Idle }
    }

    pub fn se(&self) -> &SecureElement {
        &self.se
    }

    pub fn into_se(self) -> SecureElement {
        self.se
    }

    pub fn reset(&mut self) {
        self.transport_lost();
        self.state = SessionState::Idle;
    }
}

impl FrameHandler for SeHost {
    fn handle(&mut self, frame: &WireFrame) -> WireFrame {
        match (frame.kind, self.state) {
            (FrameKind::SessionOpen, SessionState::Idle) => {
                self.se.open_session(ChannelOrigin::Contactless);
                self.state = SessionState::Open;
                WireFrame::session_open()
            }
            (FrameKind::SessionOpen, _) => {
                WireFrame::error(ErrorReason::Protocol, "one session per connection")
            }
            (FrameKind::CApdu, SessionState::Open) => {
                WireFrame::rapdu(self.se.transmit(ChannelOrigin::Contactless, &frame.payload))
            }
            (FrameKind::CApdu, _) => WireFrame::error(ErrorReason::NotOpen, ""),
            (FrameKind::SessionClose, _) => {
                self.transport_lost();
                WireFrame::session_close()
            }
            _ => unexpected(frame),
        }
    }

    fn transport_lost(&mut self) {
        if self.state == SessionState::Open {
            self.se.close_session(ChannelOrigin::Contactless);
        }
        self.state = SessionState::Closed;
    }

    fn session_ended(&self) -> bool {
        self.state == SessionState::Closed
    }
}
