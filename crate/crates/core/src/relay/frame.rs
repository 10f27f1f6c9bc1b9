//! Wire format between the card emulator and the relay app.
//!
//! ```text
//! +------+----------------+-----------------+
//! | kind | length (u16 BE)| payload (length)|
//! +------+----------------+-----------------+
//! ```
//!
//! `SessionOpen` and `SessionClose` carry no payload. An `Error` payload is a
//! one-byte [`ErrorReason`] followed by an optional UTF-8 message.

use std::fmt;
use std::io::{self, Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::hexfmt::to_hex;

pub const HEADER_LEN: usize = 3;
pub const MAX_PAYLOAD: usize = u16::MAX as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameKind {
    SessionOpen = 0x01,
    SessionClose = 0x02,
    CApdu = 0x03,
    RApdu = 0x04,
    Error = 0x05,
}

impl TryFrom<u8> for FrameKind {
    type Error = FrameError;

    fn try_from(value: u8) -> Result<Self, FrameError> {
        Ok(match value {
            0x01 => Self::SessionOpen,
            0x02 => Self::SessionClose,
            0x03 => Self::CApdu,
            0x04 => Self::RApdu,
            0x05 => Self::Error,
            other => return Err(FrameError::UnknownKind(other)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum ErrorReason {
    /// The OS-level gate refused access to the secure element.
    AccessDenied = 0x01,
    /// The target payment applet is closed to the internal interface.
    InterfaceDisabled = 0x02,
    /// The wallet on-card component refused to unlock.
    UnlockFailed = 0x03,
    /// APDU frame outside an open session.
    NotOpen = 0x04,
    /// The relay exceeded its configured hard ceiling.
    Timeout = 0x05,
    Protocol = 0x06,
    /// No relay app is connected to the emulator.
    RelayUnavailable = 0x07,
}

impl ErrorReason {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0x01 => Self::AccessDenied,
            0x02 => Self::InterfaceDisabled,
            0x03 => Self::UnlockFailed,
            0x04 => Self::NotOpen,
            0x05 => Self::Timeout,
            0x06 => Self::Protocol,
            0x07 => Self::RelayUnavailable,
            _ => return None,
        })
    }
}

impl fmt::Display for ErrorReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AccessDenied => "secure element access denied",
            Self::InterfaceDisabled => "payment applet disabled on internal interface",
            Self::UnlockFailed => "wallet unlock refused",
            Self::NotOpen => "no open session",
            Self::Timeout => "relay ceiling exceeded",
            Self::Protocol => "protocol violation",
            Self::RelayUnavailable => "relay unavailable",
        })
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("unknown frame kind {0:#04x}")]
    UnknownKind(u8),
    #[error("{0:?} frame must not carry a payload")]
    UnexpectedPayload(FrameKind),
    #[error("payload of {0} bytes exceeds frame capacity")]
    Oversize(usize),
    #[error("frame truncated")]
    Truncated,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, PartialEq, Eq)]
pub struct WireFrame {
    pub kind: FrameKind,
    pub payload: Vec<u8>,
}

impl WireFrame {
    pub fn session_open() -> Self {
        Self { kind: FrameKind::SessionOpen, payload: Vec::new() }
    }

    pub fn session_close() -> Self {
        Self { kind: FrameKind::SessionClose, payload: Vec::new() }
    }

    pub fn capdu(bytes: impl Into<Vec<u8>>) -> Self {
        Self { kind: FrameKind::CApdu, payload: bytes.into() }
    }

    pub fn rapdu(bytes: impl Into<Vec<u8>>) -> Self {
        Self { kind: FrameKind::RApdu, payload: bytes.into() }
    }

    pub fn error(reason: ErrorReason, message: &str) -> Self {
        let mut payload = vec![reason as u8];
        payload.extend_from_slice(message.as_bytes());
        Self { kind: FrameKind::Error, payload }
    }

    /// Reason and message of an `Error` frame.
    pub fn error_details(&self) -> Option<(Option<ErrorReason>, String)> {
        if self.kind != FrameKind::Error {
            return None;
        }
        let (code, message) = self.payload.split_first()?;
        Some((ErrorReason::from_code(*code), String::from_utf8_lossy(message).into_owned()))
    }

    fn check(&self) -> Result<(), FrameError> {
        if matches!(self.kind, FrameKind::SessionOpen | FrameKind::SessionClose)
            && !self.payload.is_empty()
        {
            return Err(FrameError::UnexpectedPayload(self.kind));
        }
        if self.payload.len() > MAX_PAYLOAD {
            return Err(FrameError::Oversize(self.payload.len()));
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        self.check()?;
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    /// Decodes one frame from the front of `raw`, returning it with the number
    /// of bytes consumed.
    pub fn decode(raw: &[u8]) -> Result<(Self, usize), FrameError> {
        if raw.len() < HEADER_LEN {
            return Err(FrameError::Truncated);
        }
        let kind = FrameKind::try_from(raw[0])?;
        let len = u16::from_be_bytes([raw[1], raw[2]]) as usize;
        let payload = raw.get(HEADER_LEN..HEADER_LEN + len).ok_or(FrameError::Truncated)?;
        let frame = Self { kind, payload: payload.to_vec() };
        frame.check()?;
        Ok((frame, HEADER_LEN + len))
    }

    /// Reads one frame; `Ok(None)` on a clean end of stream between frames.
    pub fn read_from<R: Read>(reader: &mut R) -> Result<Option<Self>, FrameError> {
        let mut header = [0u8; HEADER_LEN];
        let mut filled = 0;
        while filled < HEADER_LEN {
            match reader.read(&mut header[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(FrameError::Truncated),
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let kind = FrameKind::try_from(header[0])?;
        let len = u16::from_be_bytes([header[1], header[2]]) as usize;
        let mut payload = vec![0u8; len];
        reader.read_exact(&mut payload).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => FrameError::Truncated,
            _ => FrameError::Io(e),
        })?;
        let frame = Self { kind, payload };
        frame.check()?;
        Ok(Some(frame))
    }

    pub fn write_to<W: Write>(&self, writer: &mut W) -> Result<(), FrameError> {
        writer.write_all(&self.encode()?)?;
        writer.flush()?;
        Ok(())
    }
}

impl fmt::Debug for WireFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}[{}]", self.kind, to_hex(&self.payload))
    }
}
