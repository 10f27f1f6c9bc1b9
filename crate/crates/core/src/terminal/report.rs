//! Transaction report and its two renderings.
//!
//! JSON schema (all byte strings are uppercase hex, absent values are `null`):
//!
//! ```text
//! seed            u64      seed of the unpredictable-number generator
//! steps[]         { name, command, response, elapsed_ms, relay_ms }
//! selected_aid    hex
//! pan, expiry, service_code, discretionary   decimal strings from track 2
//! track1, track2  hex
//! un              hex, 4 bytes
//! atc             u16
//! cvc3_track1, cvc3_track2   hex, 2 bytes each
//! total_ms        sum of step round trips
//! timeout_ms      configured ceiling or null
//! outcome         { "status": "approved" | "declined" | "timed_out" | "card_removed", ... }
//! ```

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::apdu::StatusWord;
use crate::hexfmt::{serde_hex, to_hex_spaced};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub name: String,
    #[serde(with = "serde_hex")]
    pub command: Vec<u8>,
    #[serde(with = "serde_hex")]
    pub response: Vec<u8>,
    pub elapsed_ms: f64,
    pub relay_ms: f64,
}

impl StepRecord {
    pub fn status(&self) -> Option<StatusWord> {
        match self.response.as_slice() {
            [.., a, b] => Some(StatusWord(u16::from_be_bytes([*a, *b]))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum DeclineReason {
    /// A step answered with a status word other than 9000.
    Status { step: String, sw: String },
    /// Tag 82 advertises a profile other than Mag-Stripe only.
    UnsupportedProfile { aip: String },
    NoSupportedApplication,
    /// The FCI does not name the application that was selected.
    FciMismatch,
    MalformedResponse { step: String, detail: String },
}

impl fmt::Display for DeclineReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Status { step, sw } => write!(f, "{step} returned {sw}"),
            Self::UnsupportedProfile { aip } => write!(f, "unsupported card profile (AIP {aip})"),
            Self::NoSupportedApplication => f.write_str("no supported application"),
            Self::FciMismatch => f.write_str("FCI names a different application"),
            Self::MalformedResponse { step, detail } => write!(f, "{step}: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Approved,
    Declined { reason: DeclineReason },
    TimedOut,
    CardRemoved { detail: String },
}

impl Outcome {
    pub fn is_approved(&self) -> bool {
        matches!(self, Self::Approved)
    }

    /// Status word of a `Declined(Status)` outcome.
    pub fn declined_sw(&self) -> Option<u16> {
        match self {
            Self::Declined { reason: DeclineReason::Status { sw, .. } } => u16::from_str_radix(sw, 16).ok(),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Approved => f.write_str("APPROVED"),
            Self::Declined { reason } => write!(f, "DECLINED ({reason})"),
            Self::TimedOut => f.write_str("TIMED OUT"),
            Self::CardRemoved { detail } => write!(f, "CARD REMOVED ({detail})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionReport {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    #[serde(with = "opt_hex")]
    pub selected_aid: Option<Vec<u8>>,
    pub pan: Option<String>,
    pub expiry: Option<String>,
    pub service_code: Option<String>,
    pub discretionary: Option<String>,
    #[serde(with = "opt_hex")]
    pub track1: Option<Vec<u8>>,
    #[serde(with = "opt_hex")]
    pub track2: Option<Vec<u8>>,
    #[serde(with = "serde_hex")]
    pub un: Vec<u8>,
    pub atc: Option<u16>,
    #[serde(with = "opt_hex")]
    pub cvc3_track1: Option<Vec<u8>>,
    #[serde(with = "opt_hex")]
    pub cvc3_track2: Option<Vec<u8>>,
    pub total_ms: f64,
    pub timeout_ms: Option<f64>,
    pub outcome: Outcome,
}

impl TransactionReport {
    pub(crate) fn new(seed: u64, un: [u8; 4], timeout_ms: Option<f64>) -> Self {
        Self {
            seed,
            steps: Vec::new(),
            selected_aid: None,
            pan: None,
            expiry: None,
            service_code: None,
            discretionary: None,
            track1: None,
            track2: None,
            un: un.to_vec(),
            atc: None,
            cvc3_track1: None,
            cvc3_track2: None,
            total_ms: 0.0,
            timeout_ms,
            outcome: Outcome::Approved,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// APDU bytes of every step, without timings.
    pub fn apdu_trace(&self) -> Vec<(Vec<u8>, Vec<u8>)> {
        self.steps.iter().map(|s| (s.command.clone(), s.response.clone())).collect()
    }

    /// Human-readable hex dump per step.
    pub fn trace(&self) -> String {
        let mut out = String::new();
        for (i, step) in self.steps.iter().enumerate() {
            let _ = write!(out, "[{}] {}  {:.3} ms", i + 1, step.name, step.elapsed_ms);
            if step.relay_ms > 0.0 {
                let _ = write!(out, " (relay +{:.3} ms)", step.relay_ms);
            }
            out.push('\n');
            let _ = writeln!(out, "  C-APDU: {}", to_hex_spaced(&step.command));
            let _ = writeln!(out, "  R-APDU: {}", to_hex_spaced(&step.response));
        }
        let field = |name: &str, value: Option<String>| match value {
            Some(v) => format!("{name:<14}{v}\n"),
            None => String::new(),
        };
        out.push_str(&field("seed:", Some(self.seed.to_string())));
        out.push_str(&field("PAN:", self.pan.clone()));
        out.push_str(&field("expiry:", self.expiry.clone()));
        out.push_str(&field("service code:", self.service_code.clone()));
        out.push_str(&field("UN:", Some(to_hex_spaced(&self.un))));
        out.push_str(&field("ATC:", self.atc.map(|a| format!("{a:04X}"))));
        out.push_str(&field("CVC3 track 1:", self.cvc3_track1.as_deref().map(to_hex_spaced)));
        out.push_str(&field("CVC3 track 2:", self.cvc3_track2.as_deref().map(to_hex_spaced)));
        let _ = write!(out, "{:<14}{:.3} ms", "total:", self.total_ms);
        if let Some(limit) = self.timeout_ms {
            let _ = write!(out, " (limit {limit} ms)");
        }
        out.push('\n');
        let _ = writeln!(out, "{:<14}{}", "outcome:", self.outcome);
        out
    }
}

mod opt_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match bytes {
            Some(b) => s.serialize_some(&crate::hexfmt::to_hex(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|text| crate::hexfmt::parse_hex(&text).map_err(serde::de::Error::custom))
            .transpose()
    }
}
