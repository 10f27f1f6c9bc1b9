//! TOML configuration for the simulated secure element.
//!
//! Byte fields are hex strings, digit fields decimal strings. Every section and
//! key is optional; omitted values fall back to the defaults that reproduce the
//! appendix traces.
//!
//! ```toml
//! [card]
//! pan = "5430123405678904"
//! expiry = "1711"
//!
//! [policy]
//! require_pin_on_card = true
//! internal_disabled_aids = ["A0000000041010AA54303200FF01FFFF"]
//!
//! [wallet]
//! pin = "1234"
//! initially_locked = true
//!
//! [payment]
//! initial_atc = 17
//! cvc3_key = "00112233445566778899AABBCCDDEEFF"
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::profile::{CardProfile, ProfileError};
use super::cvc3;
use crate::aid::Aid;
use crate::hexfmt::serde_hex;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("{0}")]
    Invalid(String),
}

/// Secure-element side countermeasures. The terminal timeout lives in the
/// terminal configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountermeasurePolicy {
    /// The on-card component verifies the wallet PIN itself and refuses to
    /// unlock without a prior successful VERIFY in the same session.
    pub require_pin_on_card: bool,
    /// Applets that refuse all traffic arriving over the internal interface.
    pub internal_disabled_aids: BTreeSet<Aid>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalletConfig {
    pub pin: String,
    pub pin_tries: u8,
    pub initially_locked: bool,
    /// Reply to `80CA00A500`. The semantics of this command are unverified.
    #[serde(with = "serde_hex")]
    pub list_cards_response: Vec<u8>,
    /// Reply to `80F24000024F0000`. Also unverified.
    #[serde(with = "serde_hex")]
    pub get_status_response: Vec<u8>,
}

impl Default for WalletConfig {
    fn default() -> Self {
        let mut listing = vec![0x4F, 0x10];
        listing.extend_from_slice(Aid::prepaid_card().as_bytes());
        let mut status = listing.clone();
        status.extend_from_slice(&[0x9F, 0x70, 0x01, 0x07]);
        Self {
            pin: "1234".into(),
            pin_tries: 3,
            initially_locked: true,
            list_cards_response: listing,
            get_status_response: status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaymentConfig {
    pub aid: Aid,
    pub initial_atc: u16,
    #[serde(with = "serde_hex")]
    pub cvc3_key: Vec<u8>,
}

impl Default for PaymentConfig {
    fn default() -> Self {
        Self { aid: Aid::prepaid_card(), initial_atc: 0, cvc3_key: cvc3::DEFAULT_KEY.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectoryEntry {
    pub aid: Aid,
    pub priority: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CardManagerConfig {
    pub aid: Aid,
    /// Response body to SELECT; only its length matters for timing runs.
    #[serde(with = "serde_hex")]
    pub select_response: Vec<u8>,
}

impl Default for CardManagerConfig {
    fn default() -> Self {
        let aid = Aid::card_manager();
        let mut body = vec![0x6F, 0x65, 0x84, 0x08];
        body.extend_from_slice(aid.as_bytes());
        body.extend_from_slice(&[0xA5, 0x59, 0x9F, 0x65, 0x01, 0xFF, 0x9F, 0x6E, 0x52]);
        body.extend((0..0x52u8).map(|i| i.wrapping_mul(7)));
        Self { aid, select_response: body }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeConfig {
    pub card: CardProfile,
    pub policy: CountermeasurePolicy,
    pub wallet: WalletConfig,
    pub payment: PaymentConfig,
    /// Applications listed by the PPSE, in response order.
    pub directory: Vec<DirectoryEntry>,
    pub card_manager: CardManagerConfig,
}

impl Default for SeConfig {
    fn default() -> Self {
        Self {
            card: CardProfile::default(),
            policy: CountermeasurePolicy::default(),
            wallet: WalletConfig::default(),
            payment: PaymentConfig::default(),
            directory: vec![
                DirectoryEntry { aid: Aid::prepaid_card(), priority: 1 },
                DirectoryEntry { aid: Aid::mastercard(), priority: 2 },
            ],
            card_manager: CardManagerConfig::default(),
        }
    }
}

impl SeConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.card.validate()?;
        if self.payment.cvc3_key.len() != 16 {
            return Err(ConfigError::Invalid("payment.cvc3_key must be 16 bytes".into()));
        }
        let pin_ok = (4..=12).contains(&self.wallet.pin.len())
            && self.wallet.pin.bytes().all(|b| b.is_ascii_digit());
        if !pin_ok {
            return Err(ConfigError::Invalid("wallet.pin must be 4 to 12 digits".into()));
        }
        if !(1..=15).contains(&self.wallet.pin_tries) {
            return Err(ConfigError::Invalid("wallet.pin_tries must be 1 to 15".into()));
        }
        let registered = self.registered_aids();
        for aid in &self.policy.internal_disabled_aids {
            if !registered.contains(aid) {
                return Err(ConfigError::Invalid(format!(
                    "policy.internal_disabled_aids references unregistered AID {aid}"
                )));
            }
        }
        Ok(())
    }

    /// AIDs the secure element answers SELECT for.
    pub fn registered_aids(&self) -> BTreeSet<Aid> {
        [Aid::ppse(), self.payment.aid.clone(), Aid::wallet_component(), self.card_manager.aid.clone()]
            .into_iter()
            .collect()
    }

    pub fn cvc3_key(&self) -> [u8; 16] {
        self.payment.cvc3_key.as_slice().try_into().expect("validated key length")
    }
}
