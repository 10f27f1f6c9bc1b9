//! POS terminal running the contactless Mag-Stripe transaction.
//!
//! The sequence is SELECT PPSE, SELECT application, GET PROCESSING OPTIONS,
//! READ RECORD for every AFL entry, then COMPUTE CRYPTOGRAPHIC CHECKSUM over a
//! fresh unpredictable number. "Approved" means the card completed the
//! protocol with well-formed cryptogram fields; no issuer is consulted.

mod parse;
mod report;

pub use parse::{parse_afl, parse_track2, AflEntry, ParseError, Track2};
pub use report::{DeclineReason, Outcome, StepRecord, TransactionReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aid::Aid;
use crate::apdu::{CommandApdu, ResponseApdu};
use crate::card::CardInterface;
use crate::hexfmt::to_hex;
use crate::tlv::{self, tags, TlvNode};

pub const PPSE_NAME: &[u8] = b"2PAY.SYS.DDF01";

/// ChaCha stream reserved for the unpredictable number, apart from the
/// per-sample latency streams.
const UN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalConfig {
    /// Ceiling on the whole transaction; `None` disables enforcement.
    pub timeout_ms: Option<f64>,
    /// Drives the unpredictable number.
    pub seed: u64,
    /// Fixed unpredictable number, replacing the seeded draw.
    pub un_override: Option<[u8; 4]>,
    /// Applications the terminal accepts from the PPSE list.
    pub supported_aids: Vec<Aid>,
}

impl Default for TerminalConfig {
    fn default() -> Self {
        Self {
            timeout_ms: None,
            seed: 0,
            un_override: None,
            supported_aids: vec![Aid::prepaid_card(), Aid::mastercard()],
        }
    }
}

impl TerminalConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.timeout_ms {
            Some(t) if !(t.is_finite() && t > 0.0) => Err(format!("timeout must be positive, got {t}")),
            _ => Ok(()),
        }
    }

    pub fn unpredictable_number(&self) -> [u8; 4] {
        self.un_override.unwrap_or_else(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(UN_STREAM);
            rng.random()
        })
    }
}

pub mod commands {
    use super::*;

    pub fn select_ppse() -> CommandApdu {
        CommandApdu::select(PPSE_NAME)
    }

    pub fn select(aid: &Aid) -> CommandApdu {
        CommandApdu::select(aid.as_bytes())
    }

    /// GET PROCESSING OPTIONS with an empty PDOL data object.
    pub fn gpo() -> CommandApdu {
        CommandApdu::new(0x80, 0xA8, 0x00, 0x00).with_data(vec![0x83, 0x00]).with_le(0)
    }

    pub fn read_record(record: u8, p2: u8) -> CommandApdu {
        CommandApdu::new(0x00, 0xB2, record, p2).with_le(0)
    }

    pub fn compute_checksum(un: [u8; 4]) -> CommandApdu {
        CommandApdu::new(0x80, 0x2A, 0x8E, 0x80).with_data(un.to_vec()).with_le(0)
    }
}

/// `Err` ends the step sequence with that outcome.
type Step<T> = Result<T, Outcome>;

fn decline(reason: DeclineReason) -> Outcome {
    Outcome::Declined { reason }
}

fn malformed(step: &str, detail: impl Into<String>) -> Outcome {
    decline(DeclineReason::MalformedResponse { step: step.to_owned(), detail: detail.into() })
}

struct Run<'a, C: ?Sized> {
    card: &'a mut C,
    report: TransactionReport,
}

impl<C: CardInterface + ?Sized> Run<'_, C> {
    /// Sends one command; non-9000 statuses and the ceiling end the run.
    fn step(&mut self, name: &str, cmd: &CommandApdu) -> Step<Vec<TlvNode>> {
        let raw = cmd.to_bytes().expect("terminal commands fit short form");
        let exchange = self
            .card
            .transceive(&raw)
            .map_err(|e| Outcome::CardRemoved { detail: e.to_string() })?;
        self.report.total_ms += exchange.elapsed_ms;
        self.report.steps.push(StepRecord {
            name: name.to_owned(),
            command: raw,
            response: exchange.response.clone(),
            elapsed_ms: exchange.elapsed_ms,
            relay_ms: exchange.relay_ms,
        });
        if let Some(limit) = self.report.timeout_ms {
            if self.report.total_ms > limit {
                return Err(Outcome::TimedOut);
            }
        }
        let response = ResponseApdu::parse(&exchange.response).map_err(|e| malformed(name, e.to_string()))?;
        if !response.sw.is_success() {
            return Err(decline(DeclineReason::Status { step: name.to_owned(), sw: response.sw.to_string() }));
        }
        tlv::decode(&response.data).map_err(|e| malformed(name, e.to_string()))
    }

    fn transact(&mut self, cfg: &TerminalConfig) -> Step<()> {
        let aid = self.select_ppse(cfg)?;
        self.select_application(&aid)?;
        let afl = self.processing_options()?;
        self.read_records(&afl)?;
        self.compute_checksum(cfg)
    }

    fn select_ppse(&mut self, cfg: &TerminalConfig) -> Step<Aid> {
        const NAME: &str = "SELECT PPSE";
        let fci = self.step(NAME, &commands::select_ppse())?;
        let directory = tlv::find_node(
            &fci,
            &[tags::FCI_TEMPLATE, tags::FCI_PROPRIETARY, tags::FCI_ISSUER_DISCRETIONARY],
        )
        .ok_or_else(|| malformed(NAME, "no directory in FCI"))?;
        let mut best: Option<(u8, Aid)> = None;
        for entry in directory.children().iter().filter(|n| n.tag() == tags::APPLICATION_TEMPLATE) {
            let Some(raw) = tlv::find_tag(entry.children(), &[tags::APPLICATION_ID]) else { continue };
            let Ok(aid) = Aid::new(raw.to_vec()) else { continue };
            if !cfg.supported_aids.contains(&aid) {
                continue;
            }
            // low nibble carries the priority; 0 means none given
            let priority = match tlv::find_tag(entry.children(), &[tags::PRIORITY]) {
                Some([p]) if p & 0x0F != 0 => p & 0x0F,
                _ => 0x10,
            };
            if best.as_ref().is_none_or(|(p, _)| priority < *p) {
                best = Some((priority, aid));
            }
        }
        best.map(|(_, aid)| aid).ok_or_else(|| decline(DeclineReason::NoSupportedApplication))
    }

    fn select_application(&mut self, aid: &Aid) -> Step<()> {
        let fci = self.step("SELECT AID", &commands::select(aid))?;
        self.report.selected_aid = Some(aid.as_bytes().to_vec());
        match tlv::find_tag(&fci, &[tags::FCI_TEMPLATE, tags::DF_NAME]) {
            Some(name) if name == aid.as_bytes() => Ok(()),
            _ => Err(decline(DeclineReason::FciMismatch)),
        }
    }

    fn processing_options(&mut self) -> Step<Vec<AflEntry>> {
        const NAME: &str = "GET PROCESSING OPTIONS";
        let nodes = self.step(NAME, &commands::gpo())?;
        let (aip, afl) = match nodes.as_slice() {
            [node] if node.tag() == tags::RESPONSE_TEMPLATE => (
                tlv::find_tag(node.children(), &[tags::AIP]).map(<[u8]>::to_vec),
                tlv::find_tag(node.children(), &[tags::AFL]).map(<[u8]>::to_vec),
            ),
            // format 1: AIP followed by AFL in a single primitive
            [node] if node.tag() == crate::tlv::Tag::new(0x80) => match node.bytes() {
                Some(b) if b.len() >= 2 => (Some(b[..2].to_vec()), Some(b[2..].to_vec())),
                _ => (None, None),
            },
            _ => (None, None),
        };
        let aip = aip.filter(|a| a.len() == 2).ok_or_else(|| malformed(NAME, "missing AIP"))?;
        if aip[1] & 0x80 != 0 {
            return Err(decline(DeclineReason::UnsupportedProfile { aip: to_hex(&aip) }));
        }
        let afl = afl.ok_or_else(|| malformed(NAME, "missing AFL"))?;
        parse_afl(&afl).map_err(|e| malformed(NAME, e.to_string()))
    }

    fn read_records(&mut self, afl: &[AflEntry]) -> Step<()> {
        const NAME: &str = "READ RECORD";
        for entry in afl {
            for record in entry.records() {
                let nodes = self.step(NAME, &commands::read_record(record, entry.read_record_p2()))?;
                let Some(template) = nodes.iter().find(|n| n.tag() == tags::RECORD_TEMPLATE) else {
                    return Err(malformed(NAME, "record template missing"));
                };
                let children = template.children();
                if let Some(t1) = tlv::find_tag(children, &[tags::TRACK1_DATA]) {
                    self.report.track1 = Some(t1.to_vec());
                }
                if let Some(t2) = tlv::find_tag(children, &[tags::TRACK2_DATA]) {
                    self.report.track2 = Some(t2.to_vec());
                }
            }
        }
        let track2 = self.report.track2.clone().ok_or_else(|| malformed(NAME, "no track 2 data"))?;
        let parsed = parse_track2(&track2).map_err(|e| malformed(NAME, e.to_string()))?;
        self.report.pan = Some(parsed.pan);
        self.report.expiry = Some(parsed.expiry);
        self.report.service_code = Some(parsed.service_code);
        self.report.discretionary = Some(parsed.discretionary);
        Ok(())
    }

    fn compute_checksum(&mut self, cfg: &TerminalConfig) -> Step<()> {
        const NAME: &str = "COMPUTE CRYPTOGRAPHIC CHECKSUM";
        let nodes = self.step(NAME, &commands::compute_checksum(cfg.unpredictable_number()))?;
        let field = |tag, len: usize| -> Step<Vec<u8>> {
            match tlv::find_tag(&nodes, &[tags::RESPONSE_TEMPLATE, tag]) {
                Some(v) if v.len() == len => Ok(v.to_vec()),
                _ => Err(malformed(NAME, format!("missing or malformed {tag}"))),
            }
        };
        let cvc3_track2 = field(tags::CVC3_TRACK2, 2)?;
        let cvc3_track1 = field(tags::CVC3_TRACK1, 2)?;
        let atc = field(tags::ATC, 2)?;
        self.report.cvc3_track1 = Some(cvc3_track1);
        self.report.cvc3_track2 = Some(cvc3_track2);
        self.report.atc = Some(u16::from_be_bytes([atc[0], atc[1]]));
        Ok(())
    }
}

/// Runs one transaction against `card`. Never fails: every problem is an
/// outcome in the report.
pub fn run_transaction<C: CardInterface + ?Sized>(card: &mut C, cfg: &TerminalConfig) -> TransactionReport {
    let report = TransactionReport::new(cfg.seed, cfg.unpredictable_number(), cfg.timeout_ms);
    let mut run = Run { card, report };
    if let Err(outcome) = run.transact(cfg) {
        run.report.outcome = outcome;
    }
    run.report
}

#[cfg(test)]
mod tests;
