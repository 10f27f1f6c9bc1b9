//! Independent reference model of the secure element, written from the
//! documented rules alone, plus the drivers that compare it step by step
//! against the implementation. Shared by the state-machine tests and the
//! acceptance suite.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaysim::se::commands;
use relaysim::{Aid, ChannelOrigin, CommandApdu, CountermeasurePolicy, SeConfig, SecureElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Ppse,
    Payment,
    Wallet,
    CardManager,
    Unregistered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Select(Target),
    Gpo,
    GpoBadData,
    ReadRecord1,
    ReadRecord2,
    Checksum,
    ChecksumShort,
    Unlock,
    Lock,
    VerifyGood,
    VerifyBad,
    ListCards,
    GetStatus,
    Disable,
    Enable,
    UnknownIns,
    OpenSession,
    CloseSession,
}

pub const OPS: [Op; 22] = [
    Op::Select(Target::Ppse),
    Op::Select(Target::Payment),
    Op::Select(Target::Wallet),
    Op::Select(Target::CardManager),
    Op::Select(Target::Unregistered),
    Op::Gpo,
    Op::GpoBadData,
    Op::ReadRecord1,
    Op::ReadRecord2,
    Op::Checksum,
    Op::ChecksumShort,
    Op::Unlock,
    Op::Lock,
    Op::VerifyGood,
    Op::VerifyBad,
    Op::ListCards,
    Op::GetStatus,
    Op::Disable,
    Op::Enable,
    Op::UnknownIns,
    Op::OpenSession,
    Op::CloseSession,
];

pub const ORIGINS: [ChannelOrigin; 2] = [ChannelOrigin::Internal, ChannelOrigin::Contactless];

pub fn apdu(op: Op) -> Option<CommandApdu> {
    let payment = Aid::prepaid_card();
    Some(match op {
        Op::Select(t) => CommandApdu::select(match t {
            Target::Ppse => b"2PAY.SYS.DDF01".to_vec(),
            Target::Payment => payment.as_bytes().to_vec(),
            Target::Wallet => Aid::wallet_component().as_bytes().to_vec(),
            Target::CardManager => Aid::card_manager().as_bytes().to_vec(),
            Target::Unregistered => Aid::mastercard().as_bytes().to_vec(),
        }
        .as_slice()),
        Op::Gpo => CommandApdu::new(0x80, 0xA8, 0, 0).with_data([0x83, 0x00]).with_le(0),
        Op::GpoBadData => CommandApdu::new(0x80, 0xA8, 0, 0).with_data([0x83, 0x02, 0xAA, 0xBB]).with_le(0),
        Op::ReadRecord1 => CommandApdu::new(0x00, 0xB2, 0x01, 0x0C).with_le(0),
        Op::ReadRecord2 => CommandApdu::new(0x00, 0xB2, 0x02, 0x0C).with_le(0),
        Op::Checksum => CommandApdu::new(0x80, 0x2A, 0x8E, 0x80).with_data([0, 0, 0, 0x80]).with_le(0),
        Op::ChecksumShort => CommandApdu::new(0x80, 0x2A, 0x8E, 0x80).with_data([0, 0, 0x80]).with_le(0),
        Op::Unlock => commands::unlock(),
        Op::Lock => commands::lock(),
        Op::VerifyGood => commands::verify_pin("1234"),
        Op::VerifyBad => commands::verify_pin("9999"),
        Op::ListCards => commands::list_cards(),
        Op::GetStatus => commands::get_status(),
        Op::Disable => commands::disable_card(&payment),
        Op::Enable => commands::enable_card(&payment),
        Op::UnknownIns => CommandApdu::new(0x80, 0xF1, 0, 0),
        Op::OpenSession | Op::CloseSession => return None,
    })
}

/// Reference model, written from the documented rules alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pin_policy: bool,
    internal_disabled: bool,
    locked: bool,
    enabled: bool,
    atc: u16,
    tries: u8,
    selected: [Option<Target>; 2],
    verified: [bool; 2],
}

pub fn idx(origin: ChannelOrigin) -> usize {
    match origin {
        ChannelOrigin::Internal => 0,
        ChannelOrigin::Contactless => 1,
    }
}

impl Model {
    pub fn new(pin_policy: bool, internal_disabled: bool, locked: bool) -> Self {
        Self {
            pin_policy,
            internal_disabled,
            locked,
            enabled: true,
            atc: 0,
            tries: 3,
            selected: [None; 2],
            verified: [false; 2],
        }
    }

    fn drop_payment_selections(&mut self) {
        for s in &mut self.selected {
            if *s == Some(Target::Payment) {
                *s = None;
            }
        }
    }

    /// Status word, or `None` for session pseudo-operations.
    pub fn apply(&mut self, origin: ChannelOrigin, op: Op) -> Option<u16> {
        let o = idx(origin);
        let internal = origin == ChannelOrigin::Internal;
        let wallet_class = matches!(
            op,
            Op::Unlock | Op::Lock | Op::VerifyGood | Op::VerifyBad | Op::ListCards | Op::GetStatus | Op::Disable | Op::Enable
        );
        let payment_class = matches!(
            op,
            Op::Gpo | Op::GpoBadData | Op::ReadRecord1 | Op::ReadRecord2 | Op::Checksum | Op::ChecksumShort
        );
        Some(match op {
            Op::OpenSession | Op::CloseSession => {
                self.selected[o] = None;
                self.verified[o] = false;
                return None;
            }
            Op::Select(target) => {
                self.selected[o] = None;
                let sw = match target {
                    Target::Unregistered => 0x6A82,
                    Target::Wallet if !internal => 0x6A82,
                    Target::Payment if !self.enabled => 0x6A82,
                    Target::Payment if internal && self.internal_disabled => 0x6A82,
                    Target::Payment if self.locked => 0x6985,
                    _ => 0x9000,
                };
                if sw == 0x9000 {
                    self.selected[o] = Some(target);
                }
                sw
            }
            _ if !internal && wallet_class => 0x6985,
            _ => match self.selected[o] {
                None if internal && payment_class && self.internal_disabled => 0x6A82,
                None => 0x6985,
                Some(Target::Ppse | Target::CardManager) => 0x6D00,
                Some(Target::Unregistered) => unreachable!("never selected"),
                Some(Target::Payment) if self.locked => 0x6985,
                Some(Target::Payment) => match op {
                    Op::Gpo | Op::ReadRecord1 => 0x9000,
                    Op::GpoBadData => 0x6A80,
                    Op::ReadRecord2 => 0x6A83,
                    Op::ChecksumShort => 0x6700,
                    Op::Checksum => {
                        self.atc += 1;
                        0x9000
                    }
                    _ => 0x6D00,
                },
                Some(Target::Wallet) => match op {
                    Op::Unlock if self.pin_policy && !self.verified[o] => 0x6985,
                    Op::Unlock => {
                        self.locked = false;
                        0x9000
                    }
                    Op::Lock => {
                        self.locked = true;
                        self.drop_payment_selections();
                        0x9000
                    }
                    Op::VerifyGood | Op::VerifyBad if !self.pin_policy => 0x6D00,
                    Op::VerifyGood | Op::VerifyBad if self.tries == 0 => 0x6983,
                    Op::VerifyGood => {
                        self.tries = 3;
                        self.verified[o] = true;
                        0x9000
                    }
                    Op::VerifyBad => {
                        self.tries -= 1;
                        self.verified[o] = false;
                        0x63C0 | self.tries as u16
                    }
                    Op::ListCards | Op::GetStatus => 0x9000,
                    Op::Disable => {
                        self.enabled = false;
                        self.drop_payment_selections();
                        0x9000
                    }
                    Op::Enable => {
                        self.enabled = true;
                        0x9000
                    }
                    _ => 0x6D00,
                },
            },
        })
    }
}

pub fn target_of(aid: Option<&Aid>) -> Option<Target> {
    let aid = aid?;
    Some(if *aid == Aid::ppse() {
        Target::Ppse
    } else if *aid == Aid::prepaid_card() {
        Target::Payment
    } else if *aid == Aid::wallet_component() {
        Target::Wallet
    } else if *aid == Aid::card_manager() {
        Target::CardManager
    } else {
        Target::Unregistered
    })
}

pub fn fresh(pin_policy: bool, internal_disabled: bool, locked: bool) -> (SecureElement, Model) {
    let mut policy = CountermeasurePolicy { require_pin_on_card: pin_policy, ..Default::default() };
    if internal_disabled {
        policy.internal_disabled_aids.insert(Aid::prepaid_card());
    }
    let mut config = SeConfig { policy, ..SeConfig::default() };
    config.wallet.initially_locked = locked;
    (SecureElement::new(config).unwrap(), Model::new(pin_policy, internal_disabled, locked))
}

/// Applies one step to both and compares the observable results.
pub fn step(se: &mut SecureElement, model: &mut Model, origin: ChannelOrigin, op: Op, trail: &[String]) {
    let expected = model.apply(origin, op);
    let actual = match apdu(op) {
        Some(cmd) => {
            let response = se.process(origin, &cmd);
            // lock gate: track data and cryptograms never leave a locked wallet
            if se.wallet_locked() && response.sw.is_success() {
                assert!(!matches!(op, Op::ReadRecord1 | Op::Checksum), "locked wallet leaked data: {trail:?}");
            }
            Some(response.sw.0)
        }
        None => {
            match op {
                Op::OpenSession => se.open_session(origin),
                _ => se.close_session(origin),
            }
            None
        }
    };
    assert_eq!(actual, expected, "status after {trail:?}");
    assert_eq!(se.wallet_locked(), model.locked, "lock after {trail:?}");
    assert_eq!(se.atc(), model.atc, "ATC after {trail:?}");
    assert_eq!(se.pin_tries_left(), model.tries, "tries after {trail:?}");
    assert_eq!(se.is_enabled(&Aid::prepaid_card()), model.enabled, "enabled after {trail:?}");
    for origin in ORIGINS {
        assert_eq!(target_of(se.selected(origin)), model.selected[idx(origin)], "selection after {trail:?}");
    }
}

pub fn start_states() -> impl Iterator<Item = (bool, bool, bool)> {
    (0..8).map(|i| (i & 1 != 0, i & 2 != 0, i & 4 != 0))
}

/// Every two-step sequence from every start state; returns the steps checked.
pub fn exhaustive_two_step_sequences() -> usize {
    let moves: Vec<(ChannelOrigin, Op)> =
        ORIGINS.iter().flat_map(|&o| OPS.iter().map(move |&op| (o, op))).collect();
    let mut checked = 0;
    for (pin, disabled, locked) in start_states() {
        for &first in &moves {
            for &second in &moves {
                let (mut se, mut model) = fresh(pin, disabled, locked);
                let mut trail = vec![format!("pin={pin} disabled={disabled} locked={locked}")];
                for (origin, op) in [first, second] {
                    trail.push(format!("{origin}:{op:?}"));
                    step(&mut se, &mut model, origin, op, &trail);
                    checked += 1;
                }
            }
        }
    }
    checked
}

/// `walks` random sequences of `len` steps per start state.
pub fn seeded_random_walks(seed: u64, walks: usize, len: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (pin, disabled, locked) in start_states() {
        for _ in 0..walks {
            let (mut se, mut model) = fresh(pin, disabled, locked);
            let mut trail = vec![format!("pin={pin} disabled={disabled} locked={locked}")];
            for _ in 0..len {
                let origin = ORIGINS[rng.random_range(0..2)];
                let op = OPS[rng.random_range(0..OPS.len())];
                trail.push(format!("{origin}:{op:?}"));
                step(&mut se, &mut model, origin, op, &trail);
            }
        }
    }
}
