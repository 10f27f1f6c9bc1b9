//! Card personalisation data and its Mag-Stripe record encoding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hexfmt::serde_hex;
use crate::tlv::{tags, TlvNode};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("{field} must be {expected}")]
    Field { field: &'static str, expected: &'static str },
    #[error("PAN {0} fails the Luhn check")]
    Luhn(String),
}

/// Luhn (mod 10) validity of a digit string.
pub fn luhn_valid(digits: &str) -> bool {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    let sum: u32 = digits
        .bytes()
        .rev()
        .enumerate()
        .map(|(i, b)| {
            let d = (b - b'0') as u32;
            if i % 2 == 1 {
                let d = d * 2;
                if d > 9 { d - 9 } else { d }
            } else {
                d
            }
        })
        .sum();
    sum % 10 == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CardProfile {
    pub pan: String,
    /// YYMM
    pub expiry: String,
    pub service_code: String,
    pub discretionary: String,
    /// Track 1 name field, between the two `^` separators.
    pub cardholder: String,
    /// Application label returned in the FCI.
    pub label: String,
    #[serde(with = "serde_hex")]
    pub mag_stripe_version: Vec<u8>,
    #[serde(with = "serde_hex")]
    pub aip: Vec<u8>,
    #[serde(with = "serde_hex")]
    pub afl: Vec<u8>,
    #[serde(with = "serde_hex")]
    pub track1_cvc3_bitmap: Vec<u8>,
    #[serde(with = "serde_hex")]
    pub track1_un_atc_bitmap: Vec<u8>,
    pub track1_atc_digits: u8,
    #[serde(with = "serde_hex")]
    pub track2_cvc3_bitmap: Vec<u8>,
    #[serde(with = "serde_hex")]
    pub track2_un_atc_bitmap: Vec<u8>,
    pub track2_atc_digits: u8,
}

impl Default for CardProfile {
    fn default() -> Self {
        Self {
            // synthetic stand-in for the masked "5430 xxxx 0xx7 xxxx"
            pan: "5430123405678904".into(),
            expiry: "1711".into(),
            service_code: "101".into(),
            discretionary: "0010000000000".into(),
            cardholder: " /".into(),
            label: "MasterCard".into(),
            mag_stripe_version: vec![0x00, 0x01],
            aip: vec![0x00, 0x00],
            afl: vec![0x08, 0x01, 0x01, 0x00],
            track1_cvc3_bitmap: vec![0x00, 0x00, 0x00, 0x00, 0x00, 0x38],
            track1_un_atc_bitmap: vec![0x00, 0x00, 0x00, 0x00, 0x03, 0xC6],
            track1_atc_digits: 4,
            track2_cvc3_bitmap: vec![0x00, 0x38],
            track2_un_atc_bitmap: vec![0x03, 0xC6],
            track2_atc_digits: 4,
        }
    }
}

fn digits(value: &str, len: usize) -> bool {
    value.len() == len && value.bytes().all(|b| b.is_ascii_digit())
}

impl CardProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let checks: [(&'static str, bool, &'static str); 10] = [
            ("pan", digits(&self.pan, 16), "16 decimal digits"),
            ("expiry", digits(&self.expiry, 4), "4 decimal digits (YYMM)"),
            ("service_code", digits(&self.service_code, 3), "3 decimal digits"),
            ("discretionary", digits(&self.discretionary, 13), "13 decimal digits"),
            ("cardholder", self.cardholder.len() == 2 && !self.cardholder.contains('^'), "2 characters without '^'"),
            ("aip", self.aip.len() == 2, "2 bytes"),
            ("afl", !self.afl.is_empty() && self.afl.len() % 4 == 0, "a non-empty multiple of 4 bytes"),
            ("track1 bitmaps", self.track1_cvc3_bitmap.len() == 6 && self.track1_un_atc_bitmap.len() == 6, "6 bytes each"),
            ("track2 bitmaps", self.track2_cvc3_bitmap.len() == 2 && self.track2_un_atc_bitmap.len() == 2, "2 bytes each"),
            ("mag_stripe_version", self.mag_stripe_version.len() == 2, "2 bytes"),
        ];
        for (field, ok, expected) in checks {
            if !ok {
                return Err(ProfileError::Field { field, expected });
            }
        }
        if !self.label.is_ascii() || self.label.is_empty() || self.label.len() > 16 {
            return Err(ProfileError::Field { field: "label", expected: "1 to 16 ASCII characters" });
        }
        if !luhn_valid(&self.pan) {
            return Err(ProfileError::Luhn(self.pan.clone()));
        }
        Ok(())
    }

    /// ISO/IEC 7813 structure B track 1 as ASCII.
    pub fn track1(&self) -> Vec<u8> {
        format!(
            "B{}^{}^{}{}{}",
            self.pan, self.cardholder, self.expiry, self.service_code, self.discretionary
        )
        .into_bytes()
    }

    /// Track 2 equivalent data: BCD digits, `D` separator, `F` pad to a whole byte.
    pub fn track2(&self) -> Vec<u8> {
        let mut nibbles: Vec<u8> = self.pan.bytes().map(|b| b - b'0').collect();
        nibbles.push(0xD);
        nibbles.extend(
            self.expiry
                .bytes()
                .chain(self.service_code.bytes())
                .chain(self.discretionary.bytes())
                .map(|b| b - b'0'),
        );
        if nibbles.len() % 2 == 1 {
            nibbles.push(0xF);
        }
        nibbles.chunks(2).map(|p| (p[0] << 4) | p[1]).collect()
    }

    /// The single Mag-Stripe record (SFI 1, record 1).
    pub fn record(&self) -> TlvNode {
        TlvNode::constructed(
            tags::RECORD_TEMPLATE,
            vec![
                TlvNode::primitive(tags::MAG_STRIPE_VERSION, self.mag_stripe_version.clone()),
                TlvNode::primitive(tags::TRACK1_CVC3_BITMAP, self.track1_cvc3_bitmap.clone()),
                TlvNode::primitive(tags::TRACK1_UN_ATC_BITMAP, self.track1_un_atc_bitmap.clone()),
                TlvNode::primitive(tags::TRACK1_DATA, self.track1()),
                TlvNode::primitive(tags::TRACK1_ATC_DIGITS, vec![self.track1_atc_digits]),
                TlvNode::primitive(tags::TRACK2_CVC3_BITMAP, self.track2_cvc3_bitmap.clone()),
                TlvNode::primitive(tags::TRACK2_UN_ATC_BITMAP, self.track2_un_atc_bitmap.clone()),
                TlvNode::primitive(tags::TRACK2_DATA, self.track2()),
                TlvNode::primitive(tags::TRACK2_ATC_DIGITS, vec![self.track2_atc_digits]),
            ],
        )
    }
}
