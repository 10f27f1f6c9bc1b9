//! Exit codes, output files and multi-process wiring of the binary.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

fn relaysim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaysim")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn pos_direct_exit_codes() {
    let ok = relaysim(&["pos-direct", "--seed", "1"]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).contains("outcome:      APPROVED"));

    let locked = relaysim(&["pos-direct", "--origin", "contactless", "--no-unlock", "--seed", "1"]);
    assert_eq!(code(&locked), 1);
    assert!(stdout(&locked).contains("SELECT AID returned 6985"));

    assert_eq!(code(&relaysim(&["pos-direct", "--config", "/definitely/not/here.toml"])), 2);
    assert_eq!(code(&relaysim(&["pos-direct", "--timeout-ms", "0"])), 2);
    assert_eq!(code(&relaysim(&["pos-direct", "--un", "0102"])), 2);
    assert_eq!(code(&relaysim(&["pos-direct", "--origin", "bluetooth"])), 2);
}

#[test]
fn un_override_reproduces_the_reference_command() {
    let out = relaysim(&["pos-direct", "--un", "00000080", "--seed", "3"]);
    assert!(stdout(&out).contains("C-APDU: 80 2A 8E 80 04 00 00 00 80 00"));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn identical_flags_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["pos-direct", "--seed", "9", "--timeout-ms", "400"],
        &["relay-attack", "--seed", "9", "--model", "internet"],
        &["relay-attack", "--seed", "9", "--transport", "pipe", "--pin-on-card"],
        &["bench", "--path", "all", "--reps", "300", "--seed", "9"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let dirs = [tmp.path().join(format!("{i}a")), tmp.path().join(format!("{i}b"))];
        let outs: Vec<Output> = dirs
            .iter()
            .map(|d| {
                let mut full = args.to_vec();
                full.extend(["--out", d.to_str().unwrap()]);
                relaysim(&full)
            })
            .collect();
        assert_eq!(outs[0].stdout, outs[1].stdout, "{args:?}");
        let (a, b) = (files(&dirs[0]), files(&dirs[1]));
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn entropy_seed_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let out = relaysim(&["pos-direct", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let seed: u64 = stderr.split_whitespace().nth(1).unwrap().parse().unwrap();
    let report = fs::read_to_string(tmp.path().join("report.json")).unwrap();
    assert!(report.contains(&format!("\"seed\": {seed}")));
}

#[test]
fn relay_attack_countermeasures_fail_the_run() {
    assert_eq!(code(&relaysim(&["relay-attack", "--seed", "2"])), 0);
    for flag in ["--pin-on-card", "--internal-disable", "--deny-access"] {
        let out = relaysim(&["relay-attack", "--seed", "2", flag]);
        assert_eq!(code(&out), 1, "{flag}");
        assert!(stdout(&out).contains("wallet locked: true"), "{flag}");
    }
    // a relay app that knows the PIN gets past the on-card check
    assert_eq!(code(&relaysim(&["relay-attack", "--seed", "2", "--pin-on-card", "--pin", "1234"])), 0);
    // the emulator-side ceiling turns a slow relay into a lost card
    let out = relaysim(&["relay-attack", "--seed", "2", "--model", "internet", "--ceiling-ms", "100"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("CARD REMOVED"));
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(&config, "seed = 5\nmodel = \"internet\"\ntimeout_ms = 500.0\nout = \"o\"\n").unwrap();
    let out = relaysim(&["relay-attack", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("TIMED OUT"));
    assert!(tmp.path().join("o/report.json").exists());
    // flags override the file
    let out = relaysim(&["relay-attack", "--config", config.to_str().unwrap(), "--model", "wifi", "--timeout-ms", "5000"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn bench_flags() {
    assert_eq!(code(&relaysim(&["bench", "--reps", "0"])), 2);
    assert_eq!(code(&relaysim(&["bench", "--bins", "1", "--reps", "5"])), 2);
    let out = relaysim(&["bench", "--path", "internet", "--reps", "2000", "--seed", "7", "--ascii"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("path=internet reps=2000"));
    assert!(text.contains("median_ms > 1000: true"));
    assert!(text.contains("c_apdu=13B r_apdu=105B"));
    let out = relaysim(&["bench", "--path", "external", "--reps", "100", "--seed", "7"]);
    assert!(stdout(&out).contains("median_ms > 1000: false"));
}

#[test]
fn decode_subcommand() {
    let out = relaysim(&["decode", "6F 1A 84 0E 32 50 41 59 2E 53 59 53 2E 44 44 46 30 31 A5 08 BF 0C 05 61 03 87 01 01 90 00"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("R-APDU SW=9000"));
    assert!(text.contains("      87 [1] 01"));
    assert_eq!(code(&relaysim(&["decode", "0G"])), 2);
    let out = relaysim(&["decode", "--as", "tlv", "9F3602", "0012"]);
    assert_eq!(stdout(&out), "9F36 [2] 0012\n");
}

/// Starts a listener role and returns it with the addresses it reports.
fn spawn_listener(args: &[&str], roles: usize) -> (Child, Vec<String>) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_relaysim"))
        .args(args)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addrs = (0..roles)
        .map(|_| lines.next().unwrap().unwrap().split_whitespace().nth(2).unwrap().to_owned())
        .collect();
    std::thread::spawn(move || lines.for_each(drop));
    (child, addrs)
}

#[test]
fn separate_processes_over_tcp() {
    let (emulator, addrs) = spawn_listener(
        &["emulator", "--relay-listen", "127.0.0.1:0", "--terminal-listen", "127.0.0.1:0", "--seed", "1"],
        2,
    );
    let relay_app = Command::new(env!("CARGO_BIN_EXE_relaysim"))
        .args(["relay-app", "--connect", &addrs[0]])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let terminal = relaysim(&["pos-direct", "--connect", &addrs[1], "--seed", "4"]);
    let relay_app = relay_app.wait_with_output().unwrap();
    assert_eq!(code(&terminal), 0, "{}", stdout(&terminal));
    assert!(emulator.wait_with_output().unwrap().status.success());
    assert_eq!(stdout(&relay_app), "wallet_locked=true atc=1 pin_tries_left=3\n");

    let (host, addrs) = spawn_listener(&["se-host", "--listen", "127.0.0.1:0"], 1);
    let locked = relaysim(&["pos-direct", "--connect", &addrs[0], "--seed", "4"]);
    assert_eq!(code(&locked), 1);
    assert!(stdout(&locked).contains("6985"));
    host.wait_with_output().unwrap();
}
