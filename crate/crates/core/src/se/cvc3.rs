//! Keyed stand-in for the dynamic CVC3.
//!
//! The genuine PayPass derivation is proprietary. This simulator computes
//!
//! ```text
//! CVC3_trackN = HMAC-SHA256(key, label_N || UN || ATC)[0..2]
//! ```
//!
//! with `label_1 = "CVC3-TRACK1"`, `label_2 = "CVC3-TRACK2"`, the 4-byte
//! unpredictable number as sent by the terminal and the ATC big-endian. The
//! output has the same shape and per-transaction dynamics as the real value and
//! nothing more.

use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;

pub const TRACK1_LABEL: &[u8] = b"CVC3-TRACK1";
pub const TRACK2_LABEL: &[u8] = b"CVC3-TRACK2";

/// Fixed test key used by the default configuration.
pub const DEFAULT_KEY: [u8; 16] = [
    0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xAA, 0xBB, 0xCC, 0xDD, 0xEE, 0xFF,
];

pub fn compute(key: &[u8; 16], label: &[u8], un: [u8; 4], atc: u16) -> [u8; 2] {
    let mut mac = Hmac::<Sha256>::new_from_slice(key).expect("HMAC accepts any key length");
    mac.update(label);
    mac.update(&un);
    mac.update(&atc.to_be_bytes());
    let digest = mac.finalize().into_bytes();
    [digest[0], digest[1]]
}

/// `(track1, track2)` checksums for one transaction.
pub fn pair(key: &[u8; 16], un: [u8; 4], atc: u16) -> ([u8; 2], [u8; 2]) {
    (compute(key, TRACK1_LABEL, un, atc), compute(key, TRACK2_LABEL, un, atc))
}
