//! Decoders for the two packed card data objects the terminal interprets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed AFL: {0}")]
    MalformedAfl(String),
    #[error("malformed track 2: {0}")]
    MalformedTrack(String),
}

/// One Application File Locator entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AflEntry {
    pub sfi: u8,
    pub first_record: u8,
    pub last_record: u8,
    /// Records, counted from `first_record`, that take part in offline data
    /// authentication.
    pub signed_count: u8,
}

impl AflEntry {
    pub fn records(&self) -> std::ops::RangeInclusive<u8> {
        self.first_record..=self.last_record
    }

    /// P2 of the READ RECORD command for this file.
    pub fn read_record_p2(&self) -> u8 {
        (self.sfi << 3) | 0x04
    }
}

pub fn parse_afl(afl: &[u8]) -> Result<Vec<AflEntry>, ParseError> {
    if afl.is_empty() || afl.len() % 4 != 0 {
        return Err(ParseError::MalformedAfl(format!("length {} is not a positive multiple of 4", afl.len())));
    }
    afl.chunks_exact(4)
        .map(|c| {
            let entry = AflEntry { sfi: c[0] >> 3, first_record: c[1], last_record: c[2], signed_count: c[3] };
            if c[0] & 0x07 != 0 || !(1..=30).contains(&entry.sfi) {
                return Err(ParseError::MalformedAfl(format!("bad SFI byte {:02X}", c[0])));
            }
            if entry.first_record == 0 || entry.last_record < entry.first_record {
                return Err(ParseError::MalformedAfl(format!(
                    "bad record range {}..{}",
                    entry.first_record, entry.last_record
                )));
            }
            if entry.signed_count > entry.last_record - entry.first_record + 1 {
                return Err(ParseError::MalformedAfl("signed count exceeds record range".into()));
            }
            Ok(entry)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Track2 {
    pub pan: String,
    pub expiry: String,
    pub service_code: String,
    pub discretionary: String,
}

/// Splits BCD track 2 equivalent data at the `D` separator. A single trailing
/// `F` nibble pads odd digit counts.
pub fn parse_track2(raw: &[u8]) -> Result<Track2, ParseError> {
    let bad = |why: &str| ParseError::MalformedTrack(why.to_owned());
    let mut nibbles: Vec<u8> = raw.iter().flat_map(|b| [b >> 4, b & 0x0F]).collect();
    if nibbles.last() == Some(&0x0F) {
        nibbles.pop();
    }
    let sep = nibbles.iter().position(|&n| n == 0x0D).ok_or_else(|| bad("no separator"))?;
    let digits = |part: &[u8]| -> Result<String, ParseError> {
        part.iter()
            .map(|&n| if n <= 9 { Ok(char::from(b'0' + n)) } else { Err(bad("non-digit nibble")) })
            .collect()
    };
    let pan = digits(&nibbles[..sep])?;
    let rest = digits(&nibbles[sep + 1..])?;
    if pan.is_empty() || pan.len() > 19 {
        return Err(bad("PAN length out of range"));
    }
    if rest.len() < 7 {
        return Err(bad("expiry and service code truncated"));
    }
    Ok(Track2 {
        pan,
        expiry: rest[..4].to_owned(),
        service_code: rest[4..7].to_owned(),
        discretionary: rest[7..].to_owned(),
    })
}
