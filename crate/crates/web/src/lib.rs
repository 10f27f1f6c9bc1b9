//! Browser bindings: every export takes and returns plain strings (JSON for
//! structured data) so the page needs no generated type glue.

use relaysim::card::TimingMode;
use relaysim::hexfmt::{parse_hex, to_hex};
use relaysim::relay::{AccessPath, LatencyModel, RelayAppConfig};
use relaysim::scenario::{run_direct, run_relay_with, LinkKind, RelaySetup};
use relaysim::terminal::TerminalConfig;
use relaysim::timing::{run_benchmark, BenchmarkSpec, Histogram, Summary};
use relaysim::{tlv, ChannelOrigin, CommandApdu, ResponseApdu, SeConfig, SecureElement};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Browser runs are capped well below the CLI default to keep the page responsive.
pub const MAX_REPETITIONS: u32 = 20_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaymentOptions {
    pub seed: u64,
    pub model: String,
    pub timeout_ms: Option<f64>,
    pub pin_on_card: bool,
    pub internal_disable: bool,
    pub deny_access: bool,
    pub relay_pin: Option<String>,
}

impl Default for PaymentOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            model: "wifi".into(),
            timeout_ms: None,
            pin_on_card: false,
            internal_disable: false,
            deny_access: false,
            relay_pin: None,
        }
    }
}

#[derive(Serialize)]
struct PaymentResult {
    outcome: String,
    approved: bool,
    refused: Option<String>,
    wallet_locked_after: bool,
    atc_after: u16,
    trace: String,
    report: Option<relaysim::terminal::TransactionReport>,
    /// Same seed, owner paying directly over the internal interface.
    direct_trace: String,
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo results serialize")
}

/// Runs the relay attack over the in-process link with the given
/// countermeasures. `options` is a JSON object; missing keys take defaults.
#[wasm_bindgen]
pub fn simulate_payment(options: &str) -> Result<String, String> {
    let opts: PaymentOptions = serde_json::from_str(options).map_err(|e| e.to_string())?;
    let path: AccessPath = opts.model.parse().map_err(|e: relaysim::relay::latency::UnknownPath| e.to_string())?;
    let terminal = TerminalConfig { timeout_ms: opts.timeout_ms, ..TerminalConfig::with_seed(opts.seed) };
    terminal.validate()?;

    let mut se = SeConfig::default();
    se.policy.require_pin_on_card = opts.pin_on_card;
    if opts.internal_disable {
        se.policy.internal_disabled_aids.insert(se.payment.aid.clone());
    }
    let setup = RelaySetup {
        se: se.clone(),
        relay: RelayAppConfig { access_granted: !opts.deny_access, pin: opts.relay_pin, ..RelayAppConfig::default() },
        model: LatencyModel::for_path(path),
        terminal: terminal.clone(),
        link: LinkKind::Pipe,
        ceiling_ms: None,
        timing: TimingMode::Simulated,
    };
    let fresh = || SecureElement::new(se.clone()).map_err(|e| e.to_string());
    let (run, _) = run_relay_with(fresh()?, &setup).map_err(|e| e.to_string())?;

    let mut owner = fresh()?;
    let pin = se.wallet.pin.clone();
    let direct = run_direct(&mut owner, ChannelOrigin::Internal, Some(Some(&pin)), &terminal);

    let (outcome, trace) = match (&run.refused, &run.report) {
        (Some(r), _) => ("SESSION REFUSED".to_string(), r.message.clone()),
        (None, Some(report)) => (report.outcome.to_string(), report.trace()),
        (None, None) => unreachable!("a run either refuses or reports"),
    };
    Ok(json(&PaymentResult {
        approved: run.approved(),
        outcome,
        refused: run.refused.as_ref().map(|r| r.message.clone()),
        wallet_locked_after: run.after.wallet_locked,
        atc_after: run.after.atc,
        trace,
        report: run.report,
        direct_trace: direct.report.trace(),
    }))
}

#[derive(Serialize)]
struct HistogramResult {
    path: String,
    bin_width_ms: f64,
    counts: Vec<u64>,
    overflow_threshold_ms: f64,
    summary: Summary,
    csv: String,
}

/// Delay histogram of one access path (`external`, `internal`, `wifi`,
/// `internet`), as JSON.
#[wasm_bindgen]
pub fn histogram(path: &str, repetitions: u32, seed: u64, bin_width_ms: f64, bin_count: usize) -> Result<String, String> {
    let path: AccessPath = path.parse().map_err(|e: relaysim::relay::latency::UnknownPath| e.to_string())?;
    if !(1..=MAX_REPETITIONS).contains(&repetitions) {
        return Err(format!("repetitions must be 1 to {MAX_REPETITIONS}"));
    }
    Histogram::new(bin_width_ms, bin_count).map_err(|e| e.to_string())?;
    let spec = BenchmarkSpec { repetitions, ..BenchmarkSpec::new(path, seed) };
    let run = run_benchmark(&spec).map_err(|e| e.to_string())?;
    let h = run.histogram(bin_width_ms, bin_count).map_err(|e| e.to_string())?;
    Ok(json(&HistogramResult {
        path: path.short_name().into(),
        bin_width_ms,
        counts: h.counts().to_vec(),
        overflow_threshold_ms: h.overflow_threshold_ms(),
        summary: run.summary(),
        csv: h.to_csv(),
    }))
}

/// Text breakdown of a hex C-APDU, R-APDU or TLV string.
#[wasm_bindgen]
pub fn decode(hex: &str) -> Result<String, String> {
    let raw = parse_hex(hex).map_err(|e| e.to_string())?;
    let n = raw.len();
    if n >= 2 && matches!(raw[n - 2], 0x61..=0x6F | 0x90 | 0x91) {
        if let Ok(r) = ResponseApdu::parse(&raw) {
            if let Ok(nodes) = tlv::decode(&r.data) {
                return Ok(format!("R-APDU SW={}\n{}", r.sw, tlv::pretty(&nodes)));
            }
        }
    }
    if let Ok(cmd) = CommandApdu::parse(&raw) {
        return Ok(format!("C-APDU {cmd}\n"));
    }
    tlv::decode(&raw).map(|nodes| tlv::pretty(&nodes)).map_err(|e| format!("not an APDU or TLV: {e} ({})", to_hex(&raw)))
}
