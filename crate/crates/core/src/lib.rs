//! Desk-scale simulation of software relay attacks against secure-element
//! Mag-Stripe payments: codec, secure element, relay plumbing, POS terminal
//! and the delay-measurement harness.

pub mod aid;
pub mod apdu;
pub mod card;
pub mod hexfmt;
pub mod reference;
pub mod relay;
pub mod scenario;
pub mod se;
pub mod terminal;
pub mod timing;
pub mod tlv;

pub use aid::Aid;
pub use apdu::{ApduError, CommandApdu, ResponseApdu, StatusWord};
pub use se::{ChannelOrigin, CountermeasurePolicy, SeConfig, SecureElement};
pub use tlv::{Tag, TlvError, TlvNode, TlvValue};
