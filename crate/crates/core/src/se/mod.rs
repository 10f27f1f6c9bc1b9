//! Simulated embedded secure element.
//!
//! Two logical channels reach the chip: the contactless interface (an external
//! reader) and the internal interface (apps on the phone's application
//! processor). Each channel has its own selected applet. The registry holds
//! four applets:
//!
//! | AID                                | applet                | reachable over |
//! |------------------------------------|-----------------------|----------------|
//! | `2PAY.SYS.DDF01`                   | PPSE directory        | both           |
//! | `A0000000041010AA54303200FF01FFFF` | Mag-Stripe payment    | both*          |
//! | `A0000004762010`                   | wallet on-card comp.  | internal only  |
//! | `A000000003535041`                 | card manager stub     | both           |
//!
//! (*) subject to the wallet lock and to `internal_disabled_aids`.
//!
//! Every command yields exactly one response; failures are status words.

pub mod config;
pub mod cvc3;
pub mod profile;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use config::{CountermeasurePolicy, SeConfig};
pub use profile::CardProfile;

use crate::aid::Aid;
use crate::apdu::{CommandApdu, ResponseApdu, StatusWord};
use crate::tlv::{self, tags, TlvNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrigin {
    Internal,
    Contactless,
}

impl ChannelOrigin {
    fn index(self) -> usize {
        match self {
            Self::Internal => 0,
            Self::Contactless => 1,
        }
    }
}

impl fmt::Display for ChannelOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Internal => "internal",
            Self::Contactless => "contactless",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppletKind {
    Directory,
    Payment,
    WalletComponent,
    CardManager,
}

#[derive(Debug, Clone)]
struct Applet {
    kind: AppletKind,
    internal_only: bool,
    enabled: bool,
}

#[derive(Debug, Clone, Default)]
struct Channel {
    selected: Option<Aid>,
    pin_verified: bool,
}

pub mod commands {
    //! Fixed wallet command frames.

    use crate::aid::Aid;
    use crate::apdu::CommandApdu;

    pub fn select_wallet() -> CommandApdu {
        CommandApdu::select(Aid::wallet_component().as_bytes())
    }

    pub fn unlock() -> CommandApdu {
        CommandApdu::new(0x80, 0xE2, 0x00, 0xAA).with_le(0)
    }

    pub fn lock() -> CommandApdu {
        CommandApdu::new(0x80, 0xE2, 0x00, 0x55).with_le(0)
    }

    pub fn verify_pin(pin: &str) -> CommandApdu {
        CommandApdu::new(0x00, 0x20, 0x00, 0x00).with_data(pin.as_bytes())
    }

    pub fn list_cards() -> CommandApdu {
        CommandApdu::new(0x80, 0xCA, 0x00, 0xA5).with_le(0)
    }

    pub fn get_status() -> CommandApdu {
        CommandApdu::new(0x80, 0xF2, 0x40, 0x00).with_data([0x4F, 0x00]).with_le(0)
    }

    fn card_toggle(p1: u8, aid: &Aid) -> CommandApdu {
        let mut data = vec![0x4F, aid.as_bytes().len() as u8];
        data.extend_from_slice(aid.as_bytes());
        CommandApdu::new(0x80, 0xF0, p1, 0x01).with_data(data).with_le(0)
    }

    pub fn disable_card(aid: &Aid) -> CommandApdu {
        card_toggle(0x01, aid)
    }

    pub fn enable_card(aid: &Aid) -> CommandApdu {
        card_toggle(0x02, aid)
    }
}

/// Instructions served by the wallet on-card component.
fn is_wallet_command(cmd: &CommandApdu) -> bool {
    matches!((cmd.cla, cmd.ins), (0x80, 0xE2 | 0xCA | 0xF2 | 0xF0) | (0x00, 0x20))
}

/// Instructions served by the payment applet.
fn is_payment_command(cmd: &CommandApdu) -> bool {
    matches!((cmd.cla, cmd.ins), (0x80, 0xA8 | 0x2A) | (0x00, 0xB2))
}

pub struct SecureElement {
    config: SeConfig,
    key: [u8; 16],
    registry: BTreeMap<Aid, Applet>,
    channels: [Channel; 2],
    wallet_locked: bool,
    pin_tries_left: u8,
    atc: u16,
}

impl std::fmt::Debug for SecureElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SecureElement")
            .field("wallet_locked", &self.wallet_locked)
            .field("pin_tries_left", &self.pin_tries_left)
            .field("atc", &self.atc)
            .finish_non_exhaustive()
    }
}

impl Default for SecureElement {
    fn default() -> Self {
        Self::new(SeConfig::default()).expect("default configuration is valid")
    }
}

impl SecureElement {
    pub fn new(config: SeConfig) -> Result<Self, config::ConfigError> {
        config.validate()?;
        let mut registry = BTreeMap::new();
        let entry = |kind, internal_only| Applet { kind, internal_only, enabled: true };
        registry.insert(Aid::ppse(), entry(AppletKind::Directory, false));
        registry.insert(config.payment.aid.clone(), entry(AppletKind::Payment, false));
        registry.insert(Aid::wallet_component(), entry(AppletKind::WalletComponent, true));
        registry.insert(config.card_manager.aid.clone(), entry(AppletKind::CardManager, false));
        Ok(Self {
            key: config.cvc3_key(),
            registry,
            channels: Default::default(),
            wallet_locked: config.wallet.initially_locked,
            pin_tries_left: config.wallet.pin_tries,
            atc: config.payment.initial_atc,
            config,
        })
    }

    pub fn config(&self) -> &SeConfig {
        &self.config
    }

    pub fn policy(&self) -> &CountermeasurePolicy {
        &self.config.policy
    }

    pub fn wallet_locked(&self) -> bool {
        self.wallet_locked
    }

    pub fn atc(&self) -> u16 {
        self.atc
    }

    pub fn pin_tries_left(&self) -> u8 {
        self.pin_tries_left
    }

    pub fn selected(&self, origin: ChannelOrigin) -> Option<&Aid> {
        self.channels[origin.index()].selected.as_ref()
    }

    pub fn is_enabled(&self, aid: &Aid) -> bool {
        self.registry.get(aid).is_some_and(|a| a.enabled)
    }

    pub fn registered(&self) -> BTreeSet<Aid> {
        self.registry.keys().cloned().collect()
    }

    /// Starts a new session on a channel: clears its selection and PIN state.
    pub fn open_session(&mut self, origin: ChannelOrigin) {
        self.channels[origin.index()] = Channel::default();
    }

    pub fn close_session(&mut self, origin: ChannelOrigin) {
        self.channels[origin.index()] = Channel::default();
    }

    /// What the wallet app does when the user unlocks it on the phone: select
    /// the on-card component, verify the PIN if given, unlock, and end the
    /// internal session. Returns the status of the last command sent.
    pub fn unlock_locally(&mut self, pin: Option<&str>) -> StatusWord {
        let origin = ChannelOrigin::Internal;
        self.open_session(origin);
        let mut sw = self.process(origin, &commands::select_wallet()).sw;
        if sw.is_success() {
            if let Some(pin) = pin {
                sw = self.process(origin, &commands::verify_pin(pin)).sw;
            }
        }
        if sw.is_success() || sw == StatusWord::INS_NOT_SUPPORTED {
            sw = self.process(origin, &commands::unlock()).sw;
        }
        self.close_session(origin);
        sw
    }

    /// Raw-bytes entry point; unparseable frames get `6700`.
    pub fn transmit(&mut self, origin: ChannelOrigin, raw: &[u8]) -> Vec<u8> {
        match CommandApdu::parse(raw) {
            Ok(cmd) => self.process(origin, &cmd).to_bytes(),
            Err(_) => ResponseApdu::status(StatusWord::WRONG_LENGTH).to_bytes(),
        }
    }

    pub fn process(&mut self, origin: ChannelOrigin, cmd: &CommandApdu) -> ResponseApdu {
        if cmd.ins == 0xA4 {
            if cmd.cla != 0x00 {
                return ResponseApdu::status(StatusWord::CLA_NOT_SUPPORTED);
            }
            if cmd.p1 != 0x04 {
                return ResponseApdu::status(StatusWord::INCORRECT_P1P2);
            }
            return self.select(origin, &cmd.data);
        }
        if origin == ChannelOrigin::Contactless && is_wallet_command(cmd) {
            return ResponseApdu::status(StatusWord::CONDITIONS_NOT_SATISFIED);
        }
        let selected = self.channels[origin.index()].selected.clone();
        let Some(aid) = selected else {
            // A disabled interface reports the payment application as absent
            // rather than merely unselected.
            let blocked = origin == ChannelOrigin::Internal
                && is_payment_command(cmd)
                && self.policy().internal_disabled_aids.contains(&self.config.payment.aid);
            return ResponseApdu::status(if blocked {
                StatusWord::FILE_NOT_FOUND
            } else {
                StatusWord::CONDITIONS_NOT_SATISFIED
            });
        };
        match self.registry[&aid].kind {
            AppletKind::Payment => self.payment_command(cmd),
            AppletKind::WalletComponent => self.wallet_command(origin, cmd),
            AppletKind::Directory | AppletKind::CardManager => {
                ResponseApdu::status(StatusWord::INS_NOT_SUPPORTED)
            }
        }
    }

    fn select(&mut self, origin: ChannelOrigin, name: &[u8]) -> ResponseApdu {
        // A failed SELECT leaves nothing selected on the channel.
        self.channels[origin.index()].selected = None;
        let Ok(aid) = Aid::new(name) else {
            return ResponseApdu::status(StatusWord::FILE_NOT_FOUND);
        };
        let Some(applet) = self.registry.get(&aid) else {
            return ResponseApdu::status(StatusWord::FILE_NOT_FOUND);
        };
        let unreachable = !applet.enabled
            || (applet.internal_only && origin == ChannelOrigin::Contactless)
            || (origin == ChannelOrigin::Internal
                && self.config.policy.internal_disabled_aids.contains(&aid));
        if unreachable {
            return ResponseApdu::status(StatusWord::FILE_NOT_FOUND);
        }
        let body = match applet.kind {
            AppletKind::Payment if self.wallet_locked => {
                return ResponseApdu::status(StatusWord::CONDITIONS_NOT_SATISFIED);
            }
            AppletKind::Payment => self.payment_fci(),
            AppletKind::Directory => self.directory_fci(),
            AppletKind::WalletComponent => Vec::new(),
            AppletKind::CardManager => self.config.card_manager.select_response.clone(),
        };
        self.channels[origin.index()].selected = Some(aid);
        ResponseApdu::success(body)
    }

    fn directory_fci(&self) -> Vec<u8> {
        let entries = self
            .config
            .directory
            .iter()
            .map(|e| {
                TlvNode::constructed(
                    tags::APPLICATION_TEMPLATE,
                    vec![
                        TlvNode::primitive(tags::APPLICATION_ID, e.aid.as_bytes()),
                        TlvNode::primitive(tags::PRIORITY, vec![e.priority]),
                    ],
                )
            })
            .collect();
        let fci = TlvNode::constructed(
            tags::FCI_TEMPLATE,
            vec![
                TlvNode::primitive(tags::DF_NAME, Aid::ppse().as_bytes()),
                TlvNode::constructed(
                    tags::FCI_PROPRIETARY,
                    vec![TlvNode::constructed(tags::FCI_ISSUER_DISCRETIONARY, entries)],
                ),
            ],
        );
        fci.encode().expect("directory fits")
    }

    fn payment_fci(&self) -> Vec<u8> {
        TlvNode::constructed(
            tags::FCI_TEMPLATE,
            vec![
                TlvNode::primitive(tags::DF_NAME, self.config.payment.aid.as_bytes()),
                TlvNode::constructed(
                    tags::FCI_PROPRIETARY,
                    vec![TlvNode::primitive(tags::APPLICATION_LABEL, self.config.card.label.as_bytes())],
                ),
            ],
        )
        .encode()
        .expect("FCI fits")
    }

    fn payment_command(&mut self, cmd: &CommandApdu) -> ResponseApdu {
        if self.wallet_locked {
            return ResponseApdu::status(StatusWord::CONDITIONS_NOT_SATISFIED);
        }
        match (cmd.cla, cmd.ins) {
            (0x80, 0xA8) => {
                if cmd.data != [tags::COMMAND_TEMPLATE.as_bytes()[0], 0x00] {
                    return ResponseApdu::status(StatusWord::WRONG_DATA);
                }
                let card = &self.config.card;
                let body = TlvNode::constructed(
                    tags::RESPONSE_TEMPLATE,
                    vec![
                        TlvNode::primitive(tags::AIP, card.aip.clone()),
                        TlvNode::primitive(tags::AFL, card.afl.clone()),
                    ],
                );
                ResponseApdu::success(body.encode().expect("GPO fits"))
            }
            (0x00, 0xB2) => {
                // P2 = SFI << 3 | 100b ("read record P1")
                if cmd.p1 == 0x01 && cmd.p2 == 0x0C {
                    ResponseApdu::success(self.config.card.record().encode().expect("record fits"))
                } else {
                    ResponseApdu::status(StatusWord::RECORD_NOT_FOUND)
                }
            }
            (0x80, 0x2A) => {
                let Ok(un) = <[u8; 4]>::try_from(cmd.data.as_slice()) else {
                    return ResponseApdu::status(StatusWord::WRONG_LENGTH);
                };
                let Some(atc) = self.atc.checked_add(1) else {
                    return ResponseApdu::status(StatusWord::CONDITIONS_NOT_SATISFIED);
                };
                self.atc = atc;
                let (track1, track2) = cvc3::pair(&self.key, un, atc);
                let body = TlvNode::constructed(
                    tags::RESPONSE_TEMPLATE,
                    vec![
                        TlvNode::primitive(tags::CVC3_TRACK2, track2),
                        TlvNode::primitive(tags::CVC3_TRACK1, track1),
                        TlvNode::primitive(tags::ATC, atc.to_be_bytes()),
                    ],
                );
                ResponseApdu::success(body.encode().expect("checksum fits"))
            }
            (_, 0xA8 | 0xB2 | 0x2A) => ResponseApdu::status(StatusWord::CLA_NOT_SUPPORTED),
            _ => ResponseApdu::status(StatusWord::INS_NOT_SUPPORTED),
        }
    }

    fn wallet_command(&mut self, origin: ChannelOrigin, cmd: &CommandApdu) -> ResponseApdu {
        match (cmd.cla, cmd.ins) {
            (0x80, 0xE2) => match (cmd.p1, cmd.p2) {
                (0x00, 0xAA) => self.unlock(origin),
                (0x00, 0x55) => {
                    self.wallet_locked = true;
                    // Abort any payment selection on either interface.
                    let payment = &self.config.payment.aid;
                    for channel in &mut self.channels {
                        if channel.selected.as_ref() == Some(payment) {
                            channel.selected = None;
                        }
                    }
                    ResponseApdu::status(StatusWord::SUCCESS)
                }
                _ => ResponseApdu::status(StatusWord::INCORRECT_P1P2),
            },
            (0x00, 0x20) => self.verify(origin, &cmd.data),
            (0x80, 0xCA) if (cmd.p1, cmd.p2) == (0x00, 0xA5) => {
                ResponseApdu::success(self.config.wallet.list_cards_response.clone())
            }
            (0x80, 0xF2) => ResponseApdu::success(self.config.wallet.get_status_response.clone()),
            (0x80, 0xF0) => self.toggle_card(cmd),
            (0x80, 0xCA) => ResponseApdu::status(StatusWord::INCORRECT_P1P2),
            (_, 0xE2 | 0xCA | 0xF2 | 0xF0) => ResponseApdu::status(StatusWord::CLA_NOT_SUPPORTED),
            _ => ResponseApdu::status(StatusWord::INS_NOT_SUPPORTED),
        }
    }

    fn unlock(&mut self, origin: ChannelOrigin) -> ResponseApdu {
        if self.config.policy.require_pin_on_card && !self.channels[origin.index()].pin_verified {
            return ResponseApdu::status(StatusWord::CONDITIONS_NOT_SATISFIED);
        }
        self.wallet_locked = false;
        ResponseApdu::status(StatusWord::SUCCESS)
    }

    fn verify(&mut self, origin: ChannelOrigin, pin: &[u8]) -> ResponseApdu {
        if !self.config.policy.require_pin_on_card {
            // The component as shipped leaves PIN checks to the phone app.
            return ResponseApdu::status(StatusWord::INS_NOT_SUPPORTED);
        }
        if self.pin_tries_left == 0 {
            return ResponseApdu::status(StatusWord::PIN_BLOCKED);
        }
        let channel = &mut self.channels[origin.index()];
        if pin == self.config.wallet.pin.as_bytes() {
            self.pin_tries_left = self.config.wallet.pin_tries;
            channel.pin_verified = true;
            ResponseApdu::status(StatusWord::SUCCESS)
        } else {
            self.pin_tries_left -= 1;
            channel.pin_verified = false;
            ResponseApdu::status(StatusWord::pin_retries_left(self.pin_tries_left))
        }
    }

    /// `80F0 P1 01 Lc 4F len AID`: P1 = 01 disables, 02 enables.
    fn toggle_card(&mut self, cmd: &CommandApdu) -> ResponseApdu {
        let enable = match (cmd.p1, cmd.p2) {
            (0x01, 0x01) => false,
            (0x02, 0x01) => true,
            _ => return ResponseApdu::status(StatusWord::INCORRECT_P1P2),
        };
        let aid = match tlv::decode(&cmd.data).as_deref() {
            Ok([node]) if node.tag() == tags::APPLICATION_ID => node.bytes().and_then(|b| Aid::new(b).ok()),
            _ => None,
        };
        let Some(aid) = aid else {
            return ResponseApdu::status(StatusWord::WRONG_DATA);
        };
        match self.registry.get_mut(&aid) {
            Some(applet) if applet.kind == AppletKind::Payment => {
                applet.enabled = enable;
                if !enable {
                    for channel in &mut self.channels {
                        if channel.selected.as_ref() == Some(&aid) {
                            channel.selected = None;
                        }
                    }
                }
                ResponseApdu::status(StatusWord::SUCCESS)
            }
            _ => ResponseApdu::status(StatusWord::FILE_NOT_FOUND),
        }
    }
}
