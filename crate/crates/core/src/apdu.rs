//! ISO 7816-4 command and response APDUs (short form only).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hexfmt::to_hex;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApduError {
    #[error("malformed APDU: {0}")]
    Malformed(&'static str),
    /// Extended-length frames and data fields above 255 bytes.
    #[error("unsupported APDU length: {0}")]
    UnsupportedLength(usize),
}

/// Two-byte status word (SW1 SW2).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatusWord(pub u16);

impl StatusWord {
    pub const SUCCESS: Self = Self(0x9000);
    pub const WRONG_LENGTH: Self = Self(0x6700);
    pub const PIN_BLOCKED: Self = Self(0x6983);
    pub const CONDITIONS_NOT_SATISFIED: Self = Self(0x6985);
    pub const WRONG_DATA: Self = Self(0x6A80);
    pub const FILE_NOT_FOUND: Self = Self(0x6A82);
    pub const RECORD_NOT_FOUND: Self = Self(0x6A83);
    pub const INCORRECT_P1P2: Self = Self(0x6A86);
    pub const INS_NOT_SUPPORTED: Self = Self(0x6D00);
    pub const CLA_NOT_SUPPORTED: Self = Self(0x6E00);

    pub const fn new(sw1: u8, sw2: u8) -> Self {
        Self(((sw1 as u16) << 8) | sw2 as u16)
    }

    /// `63Cx`: verification failed, `x` tries left.
    pub const fn pin_retries_left(remaining: u8) -> Self {
        Self::new(0x63, 0xC0 | (remaining & 0x0F))
    }

    pub const fn sw1(self) -> u8 {
        (self.0 >> 8) as u8
    }

    pub const fn sw2(self) -> u8 {
        self.0 as u8
    }

    pub const fn is_success(self) -> bool {
        self.0 == 0x9000
    }
}

impl fmt::Debug for StatusWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SW({:04X})", self.0)
    }
}

impl fmt::Display for StatusWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04X}", self.0)
    }
}

/// A command APDU.
///
/// `le` holds the raw Le byte: `None` when the field is absent, `Some(0)`
/// when the card may return up to 256 bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommandApdu {
    pub cla: u8,
    pub ins: u8,
    pub p1: u8,
    pub p2: u8,
    pub data: Vec<u8>,
    pub le: Option<u8>,
}

impl CommandApdu {
    pub fn new(cla: u8, ins: u8, p1: u8, p2: u8) -> Self {
        Self { cla, ins, p1, p2, data: Vec::new(), le: None }
    }

    pub fn with_data(mut self, data: impl Into<Vec<u8>>) -> Self {
        self.data = data.into();
        self
    }

    pub fn with_le(mut self, le: u8) -> Self {
        self.le = Some(le);
        self
    }

    /// SELECT by DF name, first occurrence, FCI requested, `Le = 00`.
    pub fn select(name: &[u8]) -> Self {
        Self::new(0x00, 0xA4, 0x04, 0x00).with_data(name).with_le(0)
    }

    /// Number of response bytes the reader will accept, decoding `00` as 256.
    pub fn expected_len(&self) -> Option<usize> {
        self.le.map(|le| if le == 0 { 256 } else { le as usize })
    }

    /// Decodes a short-form command, inferring the ISO case from the length.
    pub fn parse(raw: &[u8]) -> Result<Self, ApduError> {
        if raw.len() < 4 {
            return Err(ApduError::Malformed("command shorter than 4-byte header"));
        }
        let mut cmd = Self::new(raw[0], raw[1], raw[2], raw[3]);
        let body = &raw[4..];
        match body.len() {
            0 => {}
            1 => cmd.le = Some(body[0]),
            _ => {
                let lc = body[0] as usize;
                if lc == 0 {
                    // 00 followed by more bytes introduces an extended length.
                    return Err(ApduError::UnsupportedLength(raw.len()));
                }
                let rest = &body[1..];
                if rest.len() == lc {
                    cmd.data = rest.to_vec();
                } else if rest.len() == lc + 1 {
                    cmd.data = rest[..lc].to_vec();
                    cmd.le = Some(rest[lc]);
                } else if rest.len() < lc {
                    return Err(ApduError::Malformed("Lc exceeds remaining bytes"));
                } else {
                    return Err(ApduError::Malformed("trailing bytes after Le"));
                }
            }
        }
        Ok(cmd)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ApduError> {
        if self.data.len() > 255 {
            return Err(ApduError::UnsupportedLength(self.data.len()));
        }
        let mut out = Vec::with_capacity(6 + self.data.len());
        out.extend_from_slice(&[self.cla, self.ins, self.p1, self.p2]);
        if !self.data.is_empty() {
            out.push(self.data.len() as u8);
            out.extend_from_slice(&self.data);
        }
        if let Some(le) = self.le {
            out.push(le);
        }
        Ok(out)
    }
}

impl fmt::Display for CommandApdu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CLA={:02X} INS={:02X} P1={:02X} P2={:02X}",
            self.cla, self.ins, self.p1, self.p2
        )?;
        if !self.data.is_empty() {
            write!(f, " Lc={:02X} DATA={}", self.data.len(), to_hex(&self.data))?;
        }
        if let Some(le) = self.le {
            write!(f, " Le={le:02X}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResponseApdu {
    pub data: Vec<u8>,
    pub sw: StatusWord,
}

impl ResponseApdu {
    pub fn new(data: impl Into<Vec<u8>>, sw: StatusWord) -> Self {
        Self { data: data.into(), sw }
    }

    pub fn success(data: impl Into<Vec<u8>>) -> Self {
        Self::new(data, StatusWord::SUCCESS)
    }

    pub fn status(sw: StatusWord) -> Self {
        Self::new(Vec::new(), sw)
    }

    pub fn parse(raw: &[u8]) -> Result<Self, ApduError> {
        if raw.len() < 2 {
            return Err(ApduError::Malformed("response shorter than status word"));
        }
        let (data, sw) = raw.split_at(raw.len() - 2);
        Ok(Self::new(data, StatusWord::new(sw[0], sw[1])))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + 2);
        out.extend_from_slice(&self.data);
        out.push(self.sw.sw1());
        out.push(self.sw.sw2());
        out
    }
}
