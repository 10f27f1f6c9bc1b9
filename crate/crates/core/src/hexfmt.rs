//! Hex helpers shared by the CLI, the reports and the golden tests.
//!
//! Input is case-insensitive and may contain spaces (the appendix-style
//! `6F 3A 84 0E` layout); output is uppercase.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid hex string: {0}")]
pub struct HexError(String);

/// Parses a hex string, ignoring ASCII whitespace anywhere in the input.
pub fn parse_hex(text: &str) -> Result<Vec<u8>, HexError> {
    let compact: String = text.chars().filter(|c| !c.is_ascii_whitespace()).collect();
    hex::decode(&compact).map_err(|e| HexError(e.to_string()))
}

/// Uppercase hex without separators.
pub fn to_hex(bytes: &[u8]) -> String {
    hex::encode_upper(bytes)
}

/// Uppercase hex with a single space between bytes.
pub fn to_hex_spaced(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 3);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{b:02X}"));
    }
    out
}

/// Serde adapter storing byte vectors as uppercase hex strings.
pub mod serde_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::to_hex(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_hex(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spaces_and_case_are_ignored() {
        assert_eq!(parse_hex("6f 3a\n84").unwrap(), vec![0x6F, 0x3A, 0x84]);
        assert_eq!(parse_hex("").unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn odd_length_is_rejected() {
        assert!(parse_hex("ABC").is_err());
        assert!(parse_hex("zz").is_err());
    }

    #[test]
    fn output_is_uppercase() {
        assert_eq!(to_hex(&[0xab, 0x01]), "AB01");
        assert_eq!(to_hex_spaced(&[0xab, 0x01]), "AB 01");
        assert_eq!(to_hex_spaced(&[]), "");
    }
}
