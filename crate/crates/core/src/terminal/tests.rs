use super::*;
use crate::card::{CardError, DirectCard, Exchange};
use crate::hexfmt::parse_hex;
use crate::relay::{AccessPath, LatencyModel};
use crate::reference;
use crate::se::{ChannelOrigin, SeConfig, SecureElement};

fn unlocked(config: SeConfig) -> SecureElement {
    let mut se = SecureElement::new(config).unwrap();
    assert!(se.unlock_locally(None).is_success());
    se
}

#[test]
fn direct_internal_is_approved() {
    let mut se = unlocked(SeConfig::default());
    let before = se.atc();
    let report = run_transaction(&mut DirectCard::new(&mut se, ChannelOrigin::Internal, 3), &TerminalConfig::with_seed(3));
    assert_eq!(report.outcome, Outcome::Approved, "{}", report.trace());
    assert_eq!(report.steps.len(), 5);
    assert_eq!(report.atc, Some(before + 1));
    assert_eq!(se.atc(), before + 1);
    let profile = &se.config().card;
    assert_eq!(report.pan.as_deref(), Some(profile.pan.as_str()));
    assert_eq!(report.expiry.as_deref(), Some("1711"));
    assert_eq!(report.service_code.as_deref(), Some("101"));
    assert_eq!(report.track2, Some(profile.track2()));
    assert_eq!(report.track1, Some(profile.track1()));
    assert_eq!(report.selected_aid.as_deref(), Some(crate::Aid::prepaid_card().as_bytes()));
    let total: f64 = report.steps.iter().map(|s| s.elapsed_ms).sum();
    assert_eq!(report.total_ms, total);
}

#[test]
fn steps_match_reference_commands() {
    let mut config = SeConfig::default();
    config.payment.initial_atc = 0x11;
    let mut se = unlocked(config);
    let cfg = TerminalConfig { un_override: Some([0, 0, 0, 0x80]), ..TerminalConfig::default() };
    let report = run_transaction(&mut DirectCard::new(&mut se, ChannelOrigin::Internal, 0), &cfg);
    assert!(report.outcome.is_approved());
    for (i, step) in report.steps.iter().enumerate() {
        assert_eq!(step.command, parse_hex(reference::command(i)).unwrap(), "step {i}");
        assert!(reference::matches_masked(reference::response(i), &step.response), "step {i}");
    }
    assert_eq!(report.atc, Some(0x12));
}

#[test]
fn locked_wallet_declines_at_select_aid() {
    let mut se = SecureElement::default();
    let report = run_transaction(&mut DirectCard::new(&mut se, ChannelOrigin::Contactless, 1), &TerminalConfig::default());
    assert_eq!(report.outcome.declined_sw(), Some(0x6985));
    assert_eq!(report.steps.len(), 2);
    assert_eq!(report.steps[1].name, "SELECT AID");
    assert_eq!(se.atc(), 0);
}

#[test]
fn unpredictable_number_depends_on_seed_only() {
    let a = TerminalConfig::with_seed(1).unpredictable_number();
    assert_eq!(a, TerminalConfig::with_seed(1).unpredictable_number());
    assert_ne!(a, TerminalConfig::with_seed(2).unpredictable_number());
    let mut se = unlocked(SeConfig::default());
    let report = run_transaction(&mut DirectCard::new(&mut se, ChannelOrigin::Internal, 1), &TerminalConfig::with_seed(1));
    assert_eq!(report.un, a.to_vec());
    assert_eq!(&report.steps[4].command[5..9], &a);
}

#[test]
fn timeout_is_monotone() {
    let run = |limit: f64| {
        let mut se = unlocked(SeConfig::default());
        let model = LatencyModel::for_path(AccessPath::RelayWifi);
        let mut card = DirectCard::with_model(&mut se, ChannelOrigin::Internal, model, 8);
        let cfg = TerminalConfig { timeout_ms: Some(limit), ..TerminalConfig::with_seed(8) };
        run_transaction(&mut card, &cfg)
    };
    let mut timed_out = false;
    for limit in [2000.0, 1200.0, 900.0, 600.0, 300.0, 100.0, 1.0] {
        let report = run(limit);
        if timed_out {
            assert_eq!(report.outcome, Outcome::TimedOut, "limit {limit}");
        }
        timed_out |= report.outcome == Outcome::TimedOut;
    }
    assert!(timed_out);
    assert!(run(2000.0).outcome.is_approved());
}

#[test]
fn invalid_timeout_is_rejected() {
    for t in [0.0, -1.0, f64::NAN] {
        assert!(TerminalConfig { timeout_ms: Some(t), ..Default::default() }.validate().is_err());
    }
    assert!(TerminalConfig::default().validate().is_ok());
}

#[test]
fn emv_profile_is_declined() {
    let mut config = SeConfig::default();
    config.card.aip = vec![0x00, 0x80];
    let mut se = unlocked(config);
    let report = run_transaction(&mut DirectCard::new(&mut se, ChannelOrigin::Internal, 0), &TerminalConfig::default());
    assert!(matches!(
        report.outcome,
        Outcome::Declined { reason: DeclineReason::UnsupportedProfile { .. } }
    ));
}

#[test]
fn unsupported_applications_are_skipped() {
    let mut se = unlocked(SeConfig::default());
    let cfg = TerminalConfig { supported_aids: vec![crate::Aid::mastercard()], ..Default::default() };
    let report = run_transaction(&mut DirectCard::new(&mut se, ChannelOrigin::Internal, 0), &cfg);
    // the plain MasterCard AID is listed but not installed
    assert_eq!(report.outcome.declined_sw(), Some(0x6A82));

    let cfg = TerminalConfig { supported_aids: vec![], ..Default::default() };
    let report = run_transaction(&mut DirectCard::new(&mut se, ChannelOrigin::Internal, 0), &cfg);
    assert_eq!(report.outcome, Outcome::Declined { reason: DeclineReason::NoSupportedApplication });
}

/// Replays canned responses; runs out as a removed card.
struct Scripted(Vec<&'static str>);

impl CardInterface for Scripted {
    fn transceive(&mut self, _: &[u8]) -> Result<Exchange, CardError> {
        if self.0.is_empty() {
            return Err(CardError::Removed("gone".into()));
        }
        let response = parse_hex(self.0.remove(0)).unwrap();
        Ok(Exchange { response, elapsed_ms: 1.0, relay_ms: 0.0 })
    }
}

#[test]
fn scripted_failures() {
    let ppse = reference::response(0);
    let report = run_transaction(&mut Scripted(vec![ppse]), &TerminalConfig::default());
    assert!(matches!(report.outcome, Outcome::CardRemoved { .. }));
    assert_eq!(report.steps.len(), 1);

    let wrong_fci = "6F0A8408A0000000035350419000";
    let report = run_transaction(&mut Scripted(vec![ppse, wrong_fci]), &TerminalConfig::default());
    assert_eq!(report.outcome, Outcome::Declined { reason: DeclineReason::FciMismatch });

    let report = run_transaction(&mut Scripted(vec!["6F009000"]), &TerminalConfig::default());
    assert!(matches!(report.outcome, Outcome::Declined { reason: DeclineReason::MalformedResponse { .. } }));

    let report = run_transaction(&mut Scripted(vec!["90"]), &TerminalConfig::default());
    assert!(matches!(report.outcome, Outcome::Declined { reason: DeclineReason::MalformedResponse { .. } }));

    let gpo_format1 = "800600000801010090 00";
    let report = run_transaction(
        &mut Scripted(vec![ppse, reference::response(1), gpo_format1]),
        &TerminalConfig::default(),
    );
    // format 1 parsed; the READ RECORD then finds the card gone
    assert!(matches!(report.outcome, Outcome::CardRemoved { .. }));
    assert_eq!(report.steps.len(), 3);
}

#[test]
fn report_json_round_trips() {
    let mut se = unlocked(SeConfig::default());
    let report = run_transaction(&mut DirectCard::new(&mut se, ChannelOrigin::Internal, 5), &TerminalConfig::with_seed(5));
    let json = report.to_json();
    assert!(json.contains("\"status\": \"approved\""));
    assert_eq!(TransactionReport::from_json(&json).unwrap(), report);

    let mut locked = SecureElement::default();
    let declined = run_transaction(&mut DirectCard::new(&mut locked, ChannelOrigin::Contactless, 5), &TerminalConfig::default());
    let json = declined.to_json();
    assert!(json.contains("\"sw\": \"6985\""));
    assert!(json.contains("\"cvc3_track1\": null"));
    assert_eq!(TransactionReport::from_json(&json).unwrap(), declined);
}

#[test]
fn trace_lists_every_step() {
    let mut se = unlocked(SeConfig::default());
    let report = run_transaction(&mut DirectCard::new(&mut se, ChannelOrigin::Internal, 5), &TerminalConfig::with_seed(5));
    let trace = report.trace();
    assert_eq!(trace.matches("C-APDU").count(), 5);
    assert!(trace.contains("00 A4 04 00 0E 32 50 41 59"));
    assert!(trace.contains("outcome:      APPROVED"));
}
