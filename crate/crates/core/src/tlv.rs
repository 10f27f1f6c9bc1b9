//! BER-TLV as used by EMV: definite lengths only, tags of one to three bytes.
//!
//! Decoding is strict enough that every accepted input re-encodes to the same
//! bytes: lengths must use the minimal form.

use std::fmt;

use thiserror::Error;

use crate::hexfmt::to_hex;

/// Nesting limit for decoding untrusted input.
pub const MAX_DEPTH: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TlvError {
    #[error("truncated TLV at offset {0}")]
    Truncated(usize),
    #[error("indefinite length at offset {0}")]
    IndefiniteLength(usize),
    #[error("length field at offset {0} exceeds two bytes")]
    LengthOverflow(usize),
    #[error("non-minimal length encoding at offset {0}")]
    NonMinimalLength(usize),
    #[error("tag at offset {0} is longer than three bytes")]
    TagTooLong(usize),
    #[error("nesting deeper than {MAX_DEPTH} levels")]
    TooDeep,
    #[error("value of {0} bytes exceeds 65535")]
    Oversize(usize),
    #[error("invalid tag bytes {0}")]
    InvalidTag(String),
    #[error("tag {0} constructed bit does not match value kind")]
    KindMismatch(Tag),
}

/// A BER tag, kept as its raw bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag {
    bytes: [u8; 3],
    len: u8,
}

impl Tag {
    /// Builds a tag from its big-endian numeric form, e.g. `0x9F6C`.
    ///
    /// Panics when the value is not a well-formed tag; use [`Tag::from_bytes`]
    /// for untrusted input.
    pub const fn new(value: u32) -> Self {
        let tag = if value <= 0xFF {
            Self { bytes: [value as u8, 0, 0], len: 1 }
        } else if value <= 0xFFFF {
            Self { bytes: [(value >> 8) as u8, value as u8, 0], len: 2 }
        } else if value <= 0xFF_FFFF {
            Self { bytes: [(value >> 16) as u8, (value >> 8) as u8, value as u8], len: 3 }
        } else {
            panic!("tag wider than three bytes")
        };
        assert!(tag.is_well_formed(), "malformed BER tag");
        tag
    }

    pub fn from_bytes(raw: &[u8]) -> Result<Self, TlvError> {
        if raw.is_empty() || raw.len() > 3 {
            return Err(TlvError::InvalidTag(to_hex(raw)));
        }
        let mut bytes = [0u8; 3];
        bytes[..raw.len()].copy_from_slice(raw);
        let tag = Self { bytes, len: raw.len() as u8 };
        if tag.is_well_formed() {
            Ok(tag)
        } else {
            Err(TlvError::InvalidTag(to_hex(raw)))
        }
    }

    const fn is_well_formed(&self) -> bool {
        let multi = self.bytes[0] & 0x1F == 0x1F;
        match self.len {
            1 => !multi,
            2 => multi && self.bytes[1] & 0x80 == 0,
            3 => multi && self.bytes[1] & 0x80 != 0 && self.bytes[2] & 0x80 == 0,
            _ => false,
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }

    /// Bit 6 of the first byte.
    pub fn is_constructed(&self) -> bool {
        self.bytes[0] & 0x20 != 0
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_hex(self.as_bytes()))
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({self})")
    }
}

/// EMV tags used by the payment flow.
pub mod tags {
    use super::Tag;

    pub const APPLICATION_ID: Tag = Tag::new(0x4F);
    pub const APPLICATION_LABEL: Tag = Tag::new(0x50);
    pub const TRACK1_DATA: Tag = Tag::new(0x56);
    pub const APPLICATION_TEMPLATE: Tag = Tag::new(0x61);
    pub const FCI_TEMPLATE: Tag = Tag::new(0x6F);
    pub const RECORD_TEMPLATE: Tag = Tag::new(0x70);
    pub const RESPONSE_TEMPLATE: Tag = Tag::new(0x77);
    pub const AIP: Tag = Tag::new(0x82);
    pub const COMMAND_TEMPLATE: Tag = Tag::new(0x83);
    pub const DF_NAME: Tag = Tag::new(0x84);
    pub const PRIORITY: Tag = Tag::new(0x87);
    pub const AFL: Tag = Tag::new(0x94);
    pub const FCI_PROPRIETARY: Tag = Tag::new(0xA5);
    pub const FCI_ISSUER_DISCRETIONARY: Tag = Tag::new(0xBF0C);
    pub const ATC: Tag = Tag::new(0x9F36);
    pub const CVC3_TRACK1: Tag = Tag::new(0x9F60);
    pub const CVC3_TRACK2: Tag = Tag::new(0x9F61);
    pub const TRACK1_CVC3_BITMAP: Tag = Tag::new(0x9F62);
    pub const TRACK1_UN_ATC_BITMAP: Tag = Tag::new(0x9F63);
    pub const TRACK1_ATC_DIGITS: Tag = Tag::new(0x9F64);
    pub const TRACK2_CVC3_BITMAP: Tag = Tag::new(0x9F65);
    pub const TRACK2_UN_ATC_BITMAP: Tag = Tag::new(0x9F66);
    pub const TRACK2_DATA: Tag = Tag::new(0x9F6B);
    pub const TRACK2_ATC_DIGITS: Tag = Tag::new(0x9F67);
    pub const MAG_STRIPE_VERSION: Tag = Tag::new(0x9F6C);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TlvValue {
    Primitive(Vec<u8>),
    Constructed(Vec<TlvNode>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlvNode {
    tag: Tag,
    value: TlvValue,
}

impl TlvNode {
    pub fn try_new(tag: Tag, value: TlvValue) -> Result<Self, TlvError> {
        let constructed = matches!(value, TlvValue::Constructed(_));
        if constructed != tag.is_constructed() {
            return Err(TlvError::KindMismatch(tag));
        }
        Ok(Self { tag, value })
    }

    /// Panics if `tag` has the constructed bit set.
    pub fn primitive(tag: Tag, value: impl Into<Vec<u8>>) -> Self {
        Self::try_new(tag, TlvValue::Primitive(value.into())).expect("primitive tag")
    }

    /// Panics if `tag` lacks the constructed bit.
    pub fn constructed(tag: Tag, children: Vec<TlvNode>) -> Self {
        Self::try_new(tag, TlvValue::Constructed(children)).expect("constructed tag")
    }

    pub fn tag(&self) -> Tag {
        self.tag
    }

    pub fn value(&self) -> &TlvValue {
        &self.value
    }

    /// Raw value bytes of a primitive node.
    pub fn bytes(&self) -> Option<&[u8]> {
        match &self.value {
            TlvValue::Primitive(b) => Some(b),
            TlvValue::Constructed(_) => None,
        }
    }

    pub fn children(&self) -> &[TlvNode] {
        match &self.value {
            TlvValue::Primitive(_) => &[],
            TlvValue::Constructed(c) => c,
        }
    }

    /// Length of the encoded value field.
    pub fn value_len(&self) -> usize {
        match &self.value {
            TlvValue::Primitive(b) => b.len(),
            TlvValue::Constructed(c) => c.iter().map(TlvNode::encoded_len).sum(),
        }
    }

    pub fn encoded_len(&self) -> usize {
        let len = self.value_len();
        self.tag.as_bytes().len() + length_field_size(len) + len
    }

    pub fn encode(&self) -> Result<Vec<u8>, TlvError> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out)?;
        Ok(out)
    }

    fn encode_into(&self, out: &mut Vec<u8>) -> Result<(), TlvError> {
        out.extend_from_slice(self.tag.as_bytes());
        let len = self.value_len();
        match len {
            0..=0x7F => out.push(len as u8),
            0x80..=0xFF => out.extend_from_slice(&[0x81, len as u8]),
            0x100..=0xFFFF => out.extend_from_slice(&[0x82, (len >> 8) as u8, len as u8]),
            _ => return Err(TlvError::Oversize(len)),
        }
        match &self.value {
            TlvValue::Primitive(b) => out.extend_from_slice(b),
            TlvValue::Constructed(children) => {
                for child in children {
                    child.encode_into(out)?;
                }
            }
        }
        Ok(())
    }
}

fn length_field_size(len: usize) -> usize {
    match len {
        0..=0x7F => 1,
        0x80..=0xFF => 2,
        _ => 3,
    }
}

/// Decodes a concatenation of TLV objects into a tree.
pub fn decode(raw: &[u8]) -> Result<Vec<TlvNode>, TlvError> {
    decode_at(raw, 0, 0)
}

fn decode_at(raw: &[u8], base: usize, depth: usize) -> Result<Vec<TlvNode>, TlvError> {
    if depth > MAX_DEPTH {
        return Err(TlvError::TooDeep);
    }
    let mut nodes = Vec::new();
    let mut pos = 0;
    while pos < raw.len() {
        let start = pos;
        // tag
        let mut tag_len = 1;
        if raw[pos] & 0x1F == 0x1F {
            loop {
                let b = *raw.get(pos + tag_len).ok_or(TlvError::Truncated(base + pos))?;
                tag_len += 1;
                if b & 0x80 == 0 {
                    break;
                }
                if tag_len == 3 {
                    return Err(TlvError::TagTooLong(base + start));
                }
            }
        }
        let tag = Tag::from_bytes(&raw[pos..pos + tag_len])?;
        pos += tag_len;

        // length
        let first = *raw.get(pos).ok_or(TlvError::Truncated(base + pos))?;
        let len_at = base + pos;
        pos += 1;
        let len = match first {
            0..=0x7F => first as usize,
            0x80 => return Err(TlvError::IndefiniteLength(len_at)),
            0x81 => {
                let b = *raw.get(pos).ok_or(TlvError::Truncated(base + pos))? as usize;
                pos += 1;
                if b < 0x80 {
                    return Err(TlvError::NonMinimalLength(len_at));
                }
                b
            }
            0x82 => {
                let hi = *raw.get(pos).ok_or(TlvError::Truncated(base + pos))? as usize;
                let lo = *raw.get(pos + 1).ok_or(TlvError::Truncated(base + pos + 1))? as usize;
                pos += 2;
                let len = (hi << 8) | lo;
                if len < 0x100 {
                    return Err(TlvError::NonMinimalLength(len_at));
                }
                len
            }
            _ => return Err(TlvError::LengthOverflow(len_at)),
        };

        // value
        let end = pos.checked_add(len).filter(|&e| e <= raw.len());
        let end = end.ok_or(TlvError::Truncated(base + pos))?;
        let body = &raw[pos..end];
        let value = if tag.is_constructed() {
            TlvValue::Constructed(decode_at(body, base + pos, depth + 1)?)
        } else {
            TlvValue::Primitive(body.to_vec())
        };
        nodes.push(TlvNode { tag, value });
        pos = end;
    }
    Ok(nodes)
}

pub fn encode(nodes: &[TlvNode]) -> Result<Vec<u8>, TlvError> {
    let mut out = Vec::with_capacity(nodes.iter().map(TlvNode::encoded_len).sum());
    for node in nodes {
        node.encode_into(&mut out)?;
    }
    Ok(out)
}

/// Follows a nested tag path from the top level, returning the value bytes of
/// the first primitive node that matches the whole path.
pub fn find_tag<'a>(nodes: &'a [TlvNode], path: &[Tag]) -> Option<&'a [u8]> {
    find_node(nodes, path).and_then(TlvNode::bytes)
}

/// Like [`find_tag`] but returns the node itself, primitive or constructed.
pub fn find_node<'a>(nodes: &'a [TlvNode], path: &[Tag]) -> Option<&'a TlvNode> {
    let (head, rest) = path.split_first()?;
    for node in nodes.iter().filter(|n| n.tag == *head) {
        if rest.is_empty() {
            return Some(node);
        }
        if let Some(found) = find_node(node.children(), rest) {
            return Some(found);
        }
    }
    None
}

/// Depth-first search for the first node carrying `tag` at any depth.
pub fn find_anywhere(nodes: &[TlvNode], tag: Tag) -> Option<&TlvNode> {
    for node in nodes {
        if node.tag == tag {
            return Some(node);
        }
        if let Some(found) = find_anywhere(node.children(), tag) {
            return Some(found);
        }
    }
    None
}

/// Indented one-line-per-node rendering, used by the `decode` subcommand.
pub fn pretty(nodes: &[TlvNode]) -> String {
    fn walk(nodes: &[TlvNode], depth: usize, out: &mut String) {
        for node in nodes {
            let pad = "  ".repeat(depth);
            match node.value() {
                TlvValue::Primitive(b) => {
                    let printable = !b.is_empty()
                        && b.iter().all(|c| c.is_ascii_graphic() || *c == b' ');
                    out.push_str(&format!("{pad}{} [{}]", node.tag, b.len()));
                    if !b.is_empty() {
                        out.push_str(&format!(" {}", to_hex(b)));
                    }
                    if printable {
                        out.push_str(&format!(" \"{}\"", String::from_utf8_lossy(b)));
                    }
                    out.push('\n');
                }
                TlvValue::Constructed(children) => {
                    out.push_str(&format!("{pad}{} [{}]\n", node.tag, node.value_len()));
                    walk(children, depth + 1, out);
                }
            }
        }
    }
    let mut out = String::new();
    walk(nodes, 0, &mut out);
    out
}
