//! Reference Mag-Stripe transaction captured from a real wallet, one entry per
//! command and response. Digits masked in the capture are written as `x`
//! nibbles; [`matches_masked`] compares against such patterns.

/// `(step, command or response, hex pattern)`; responses include the status word.
pub const TRACE: [(&str, &str); 10] = [
    ("SELECT PPSE", "00A404000E325041592E5359532E444446303100"),
    (
        "SELECT PPSE response",
        "6F3A840E325041592E5359532E4444463031A528BF0C2561154F10A0000000041010AA54303200FF01FFFF\
         870101610C4F07A0000000041010870102\
         9000",
    ),
    ("SELECT payment", "00A4040010A0000000041010AA54303200FF01FFFF00"),
    (
        "SELECT payment response",
        "6F208410A0000000041010AA54303200FF01FFFFA50C500A4D617374657243617264\
         9000",
    ),
    ("GET PROCESSING OPTIONS", "80A8000002830000"),
    ("GET PROCESSING OPTIONS response", "770A820200009404080101009000"),
    ("READ RECORD", "00B2010C00"),
    (
        "READ RECORD response",
        "706A9F6C0200019F62060000000000389F63060000000003C6\
         56294235343330xxxxxxxx30xxxx37xxxxxxxx5E202F5E3137313131303130303130303030303030303030\
         9F6401049F650200389F660203C6\
         9F6B135430xxxx0xx7xxxxD17111010010000000000F9F670104\
         9000",
    ),
    ("COMPUTE CRYPTOGRAPHIC CHECKSUM", "802A8E80040000008000"),
    ("COMPUTE CRYPTOGRAPHIC CHECKSUM response", "770F9F6102xxxx9F6002xxxx9F360200129000"),
];

pub fn command(index: usize) -> &'static str {
    TRACE[index * 2].1
}

pub fn response(index: usize) -> &'static str {
    TRACE[index * 2 + 1].1
}

/// Nibble-wise comparison where `x` (or `X`) in the pattern matches anything.
/// Whitespace in the pattern is ignored.
pub fn matches_masked(pattern: &str, actual: &[u8]) -> bool {
    let nibbles: Vec<char> = pattern.chars().filter(|c| !c.is_whitespace()).collect();
    if nibbles.len() != actual.len() * 2 {
        return false;
    }
    actual.iter().enumerate().all(|(i, byte)| {
        let hi = byte >> 4;
        let lo = byte & 0x0F;
        nibble_ok(nibbles[2 * i], hi) && nibble_ok(nibbles[2 * i + 1], lo)
    })
}

fn nibble_ok(pattern: char, value: u8) -> bool {
    match pattern {
        'x' | 'X' => true,
        c => c.to_digit(16) == Some(value as u32),
    }
}

/// Replaces masked nibbles with `0` so the pattern can be decoded as bytes.
pub fn unmasked(pattern: &str) -> Vec<u8> {
    let text: String = pattern
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| if c == 'x' || c == 'X' { '0' } else { c })
        .collect();
    crate::hexfmt::parse_hex(&text).expect("reference pattern is hex")
}
