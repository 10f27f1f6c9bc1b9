//! `decode`: pretty-prints hex input as a C-APDU, an R-APDU or bare TLV.

use clap::{Args, ValueEnum};
use relaysim::hexfmt::parse_hex;
use relaysim::tlv;
use relaysim::{CommandApdu, ResponseApdu};

use crate::Failure;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Auto,
    Command,
    Response,
    Tlv,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    /// Hex bytes; spaces allowed, several arguments are joined.
    #[arg(required = true)]
    hex: Vec<String>,
    #[arg(long = "as", value_enum, default_value_t = Kind::Auto)]
    kind: Kind,
}

pub fn decode(args: &DecodeArgs) -> Result<bool, Failure> {
    let raw = parse_hex(&args.hex.join("")).map_err(|e| Failure::Usage(e.to_string()))?;
    let text = render(&raw, args.kind).map_err(Failure::Usage)?;
    print!("{text}");
    Ok(true)
}

/// Status words a card plausibly ends a response with.
fn looks_like_status(sw1: u8) -> bool {
    matches!(sw1, 0x61..=0x6F | 0x90 | 0x91)
}

fn render(raw: &[u8], kind: Kind) -> Result<String, String> {
    match kind {
        Kind::Command => command(raw),
        Kind::Response => response(raw),
        Kind::Tlv => tlv_only(raw),
        Kind::Auto => {
            let n = raw.len();
            let response_shaped =
                n >= 2 && looks_like_status(raw[n - 2]) && (n == 2 || tlv::decode(&raw[..n - 2]).is_ok());
            if response_shaped {
                response(raw)
            } else if let Ok(text) = command(raw) {
                Ok(text)
            } else {
                tlv_only(raw).map_err(|_| "input is neither an APDU nor TLV".to_string())
            }
        }
    }
}

fn command(raw: &[u8]) -> Result<String, String> {
    let cmd = CommandApdu::parse(raw).map_err(|e| e.to_string())?;
    let mut out = format!("C-APDU {cmd}\n");
    if let Ok(nodes) = tlv::decode(&cmd.data) {
        if !nodes.is_empty() {
            out.push_str(&indent(&tlv::pretty(&nodes)));
        }
    }
    Ok(out)
}

fn response(raw: &[u8]) -> Result<String, String> {
    let r = ResponseApdu::parse(raw).map_err(|e| e.to_string())?;
    let mut out = format!("R-APDU SW={} data={}B\n", r.sw, r.data.len());
    match tlv::decode(&r.data) {
        Ok(nodes) => out.push_str(&indent(&tlv::pretty(&nodes))),
        Err(_) => out.push_str(&format!("  {}\n", relaysim::hexfmt::to_hex(&r.data))),
    }
    Ok(out)
}

fn tlv_only(raw: &[u8]) -> Result<String, String> {
    let nodes = tlv::decode(raw).map_err(|e| e.to_string())?;
    Ok(tlv::pretty(&nodes))
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("  {l}\n")).collect()
}
