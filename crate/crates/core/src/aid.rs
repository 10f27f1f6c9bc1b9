use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::hexfmt::{parse_hex, to_hex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AidError {
    #[error("AID must be 5 to 16 bytes, got {0}")]
    Length(usize),
    #[error("AID is not valid hex: {0}")]
    Hex(String),
}

/// Application identifier (or DF name) used by SELECT.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Aid(Vec<u8>);

impl Aid {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, AidError> {
        let bytes = bytes.into();
        if !(5..=16).contains(&bytes.len()) {
            return Err(AidError::Length(bytes.len()));
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// Panics on invalid input; intended for the built-in constants.
    fn known(hex: &str) -> Self {
        hex.parse().expect("built-in AID")
    }

    /// `2PAY.SYS.DDF01`
    pub fn ppse() -> Self {
        Self(b"2PAY.SYS.DDF01".to_vec())
    }

    /// MasterCard Google Prepaid Card.
    pub fn prepaid_card() -> Self {
        Self::known("A0000000041010AA54303200FF01FFFF")
    }

    /// MasterCard credit/debit, listed second in the PPSE directory.
    pub fn mastercard() -> Self {
        Self::known("A0000000041010")
    }

    /// Wallet on-card component.
    pub fn wallet_component() -> Self {
        Self::known("A0000004762010")
    }

    /// Issuer Security Domain instance used as the timing workload.
    pub fn card_manager() -> Self {
        Self::known("A000000003535041")
    }
}

impl FromStr for Aid {
    type Err = AidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = parse_hex(s).map_err(|e| AidError::Hex(e.to_string()))?;
        Self::new(bytes)
    }
}

impl fmt::Display for Aid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_hex(&self.0))
    }
}

impl fmt::Debug for Aid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Aid({self})")
    }
}

impl Serialize for Aid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Aid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
