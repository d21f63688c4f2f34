//! Canonical tag-length-value encoding.
//!
//! Every structure is laid out as a one-byte structure tag followed by its
//! fields in a fixed order. Each field is `(field tag: u8, length: u32 BE,
//! payload)`. Unsigned integers are 8-byte big-endian payloads, hashes are
//! 32 raw bytes, salts 64 raw bytes. Signatures and hashes are always computed
//! over these bytes, never over in-memory values.
//!
//! The decoder is strict: wrong tags, short or over-long payloads and
//! trailing bytes are all errors carrying the byte offset where decoding
//! stopped.

use std::fmt;

use thiserror::Error;

/// Top-level tag of every structure that can appear on the wire or in a
/// transcript.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum StructureTag {
    DrawAnnounce = 0x01,
    CounterSignedAnnounce = 0x02,
    AnnounceAggregate = 0x03,
    InitiatorCommit = 0x04,
    CountersignedCommit = 0x05,
    CommitAggregate = 0x06,
    GuarantorCommit = 0x07,
    GuarantorHashAggregate = 0x08,
    CountersignedHashAggregate = 0x09,
    InitiatorReveal = 0x0A,
    GuarantorReveal = 0x0B,
    RevealAggregate = 0x0C,
    ErrorNotice = 0x0D,
    TranscriptHeader = 0x20,
}

impl StructureTag {
    /// The twelve protocol structures, in step order.
    pub const PROTOCOL: [StructureTag; 12] = [
        StructureTag::DrawAnnounce,
        StructureTag::CounterSignedAnnounce,
        StructureTag::AnnounceAggregate,
        StructureTag::InitiatorCommit,
        StructureTag::CountersignedCommit,
        StructureTag::CommitAggregate,
        StructureTag::GuarantorCommit,
        StructureTag::GuarantorHashAggregate,
        StructureTag::CountersignedHashAggregate,
        StructureTag::InitiatorReveal,
        StructureTag::GuarantorReveal,
        StructureTag::RevealAggregate,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        use StructureTag::*;
        Some(match b {
            0x01 => DrawAnnounce,
            0x02 => CounterSignedAnnounce,
            0x03 => AnnounceAggregate,
            0x04 => InitiatorCommit,
            0x05 => CountersignedCommit,
            0x06 => CommitAggregate,
            0x07 => GuarantorCommit,
            0x08 => GuarantorHashAggregate,
            0x09 => CountersignedHashAggregate,
            0x0A => InitiatorReveal,
            0x0B => GuarantorReveal,
            0x0C => RevealAggregate,
            0x0D => ErrorNotice,
            0x20 => TranscriptHeader,
            _ => return None,
        })
    }

    pub fn byte(self) -> u8 {
        self as u8
    }

    /// Short kebab-case name used in traces, scenario files and CLI output.
    pub fn name(self) -> &'static str {
        use StructureTag::*;
        match self {
            DrawAnnounce => "announce",
            CounterSignedAnnounce => "countersigned-announce",
            AnnounceAggregate => "announce-aggregate",
            InitiatorCommit => "initiator-commit",
            CountersignedCommit => "countersigned-commit",
            CommitAggregate => "commit-aggregate",
            GuarantorCommit => "guarantor-commit",
            GuarantorHashAggregate => "hash-aggregate",
            CountersignedHashAggregate => "countersigned-hash-aggregate",
            InitiatorReveal => "initiator-reveal",
            GuarantorReveal => "guarantor-reveal",
            RevealAggregate => "reveal-aggregate",
            ErrorNotice => "error-notice",
            TranscriptHeader => "transcript-header",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::PROTOCOL
            .iter()
            .copied()
            .chain([StructureTag::ErrorNotice, StructureTag::TranscriptHeader])
            .find(|t| t.name() == name)
    }
}

impl fmt::Display for StructureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tag identifying the kind of a single field inside a structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FieldTag {
    K = 0x01,
    DrawNo = 0x02,
    Hash = 0x03,
    Salt = 0x04,
    Number = 0x05,
    Permutation = 0x06,
    Signature = 0x07,
    Aggregate = 0x08,
    Phase = 0x09,
    Cause = 0x0A,
    Culprit = 0x0B,
    Scheme = 0x10,
    Member = 0x11,
    Result = 0x12,
}

impl FieldTag {
    pub fn from_byte(b: u8) -> Option<Self> {
        use FieldTag::*;
        Some(match b {
            0x01 => K,
            0x02 => DrawNo,
            0x03 => Hash,
            0x04 => Salt,
            0x05 => Number,
            0x06 => Permutation,
            0x07 => Signature,
            0x08 => Aggregate,
            0x09 => Phase,
            0x0A => Cause,
            0x0B => Culprit,
            0x10 => Scheme,
            0x11 => Member,
            0x12 => Result,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind} at byte offset {offset}")]
pub struct CodecError {
    pub offset: usize,
    pub kind: CodecErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CodecErrorKind {
    #[error("truncated input")]
    Truncated,
    #[error("unknown structure tag 0x{0:02x}")]
    UnknownStructure(u8),
    #[error("expected structure {expected}, found {found}")]
    WrongStructure {
        expected: StructureTag,
        found: StructureTag,
    },
    #[error("expected field tag 0x{expected:02x}, found 0x{found:02x}")]
    WrongField { expected: u8, found: u8 },
    #[error("field length {found} does not match expected {expected}")]
    BadLength { expected: usize, found: usize },
    #[error("trailing bytes after structure")]
    TrailingBytes,
    #[error("value out of range: {0}")]
    OutOfRange(&'static str),
    #[error("invalid UTF-8 in signer id")]
    InvalidUtf8,
}

impl CodecError {
    pub fn new(offset: usize, kind: CodecErrorKind) -> Self {
        Self { offset, kind }
    }
}

/// Builds one canonical structure.
#[derive(Debug)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(tag: StructureTag) -> Self {
        Self { buf: vec![tag.byte()] }
    }

    pub fn field(&mut self, tag: FieldTag, payload: &[u8]) -> &mut Self {
        self.buf.push(tag as u8);
        self.buf.extend_from_slice(&len_u32(payload.len()).to_be_bytes());
        self.buf.extend_from_slice(payload);
        self
    }

    pub fn u64(&mut self, tag: FieldTag, value: u64) -> &mut Self {
        self.field(tag, &value.to_be_bytes())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

fn len_u32(len: usize) -> u32 {
    u32::try_from(len).expect("field longer than 4 GiB")
}

/// Appends a `u32` big-endian length prefix followed by `bytes`.
pub fn put_prefixed(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&len_u32(bytes.len()).to_be_bytes());
    out.extend_from_slice(bytes);
}

/// Cursor over a byte slice that tracks absolute offsets for error reporting.
#[derive(Clone, Debug)]
pub struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self::with_base(buf, 0)
    }

    /// A cursor whose reported offsets start at `base`.
    pub fn with_base(buf: &'a [u8], base: usize) -> Self {
        Self { buf, pos: 0, base }
    }

    pub fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn err(&self, kind: CodecErrorKind) -> CodecError {
        CodecError::new(self.offset(), kind)
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(CodecErrorKind::Truncated));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        let b = self.take(8)?;
        Ok(u64::from_be_bytes(b.try_into().unwrap()))
    }

    /// Reads a `u32` length prefix and that many bytes.
    pub fn prefixed(&mut self) -> Result<&'a [u8], CodecError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn finish(&self) -> Result<(), CodecError> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self.err(CodecErrorKind::TrailingBytes))
        }
    }
}

/// Reads the fields of one canonical structure in declared order.
#[derive(Clone, Debug)]
pub struct Reader<'a> {
    cur: Cursor<'a>,
}

impl<'a> Reader<'a> {
    /// Checks the structure tag and positions the reader at the first field.
    pub fn open(bytes: &'a [u8], expected: StructureTag) -> Result<Self, CodecError> {
        Self::open_at(bytes, expected, 0)
    }

    pub fn open_at(bytes: &'a [u8], expected: StructureTag, base: usize) -> Result<Self, CodecError> {
        let mut cur = Cursor::with_base(bytes, base);
        let start = cur.offset();
        let b = cur.u8()?;
        let found = StructureTag::from_byte(b)
            .ok_or_else(|| CodecError::new(start, CodecErrorKind::UnknownStructure(b)))?;
        if found != expected {
            return Err(CodecError::new(
                start,
                CodecErrorKind::WrongStructure { expected, found },
            ));
        }
        Ok(Self { cur })
    }

    pub fn offset(&self) -> usize {
        self.cur.offset()
    }

    /// Reads the next field, which must carry `tag`. Returns the payload and
    /// its absolute offset.
    pub fn field(&mut self, tag: FieldTag) -> Result<(usize, &'a [u8]), CodecError> {
        let at = self.cur.offset();
        let found = self.cur.u8()?;
        if found != tag as u8 {
            return Err(CodecError::new(
                at,
                CodecErrorKind::WrongField {
                    expected: tag as u8,
                    found,
                },
            ));
        }
        let len = self.cur.u32()? as usize;
        let payload_at = self.cur.offset();
        let payload = self.cur.take(len)?;
        Ok((payload_at, payload))
    }

    pub fn fixed<const N: usize>(&mut self, tag: FieldTag) -> Result<[u8; N], CodecError> {
        let (at, payload) = self.field(tag)?;
        payload.try_into().map_err(|_| {
            CodecError::new(
                at,
                CodecErrorKind::BadLength {
                    expected: N,
                    found: payload.len(),
                },
            )
        })
    }

    pub fn u64(&mut self, tag: FieldTag) -> Result<u64, CodecError> {
        self.fixed::<8>(tag).map(u64::from_be_bytes)
    }

    /// Whether the next field carries `tag` (used for optional trailing fields).
    pub fn next_is(&self, tag: FieldTag) -> bool {
        let mut probe = self.cur.clone();
        matches!(probe.u8(), Ok(b) if b == tag as u8)
    }

    pub fn finish(self) -> Result<(), CodecError> {
        self.cur.finish()
    }
}

/// Reads a length-prefixed list of length-prefixed items from an aggregate
/// payload. Offsets are absolute.
pub fn read_list(payload: &[u8], base: usize) -> Result<Vec<(usize, &[u8])>, CodecError> {
    let mut cur = Cursor::with_base(payload, base);
    let count = cur.u32()? as usize;
    // Every item costs at least its 4-byte prefix.
    if count > payload.len() / 4 {
        return Err(cur.err(CodecErrorKind::Truncated));
    }
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let len = cur.u32()? as usize;
        let at = cur.offset();
        items.push((at, cur.take(len)?));
    }
    cur.finish()?;
    Ok(items)
}

pub fn write_list<'b>(items: impl ExactSizeIterator<Item = &'b [u8]>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&len_u32(items.len()).to_be_bytes());
    for item in items {
        put_prefixed(&mut out, item);
    }
    out
}

/// A type with a canonical byte encoding.
pub trait Canonical: Sized {
    const TAG: StructureTag;

    fn write_fields(&self, w: &mut Writer);

    fn read_fields(r: &mut Reader<'_>) -> Result<Self, CodecError>;

    fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new(Self::TAG);
        self.write_fields(&mut w);
        w.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        Self::decode_at(bytes, 0)
    }

    /// Decodes a structure embedded at absolute offset `base` of some larger
    /// buffer, so errors point into that buffer.
    fn decode_at(bytes: &[u8], base: usize) -> Result<Self, CodecError> {
        let mut r = Reader::open_at(bytes, Self::TAG, base)?;
        let value = Self::read_fields(&mut r)?;
        r.finish()?;
        Ok(value)
    }
}

/// Peeks at the structure tag of an encoded structure.
pub fn peek_tag(bytes: &[u8]) -> Result<StructureTag, CodecError> {
    let b = *bytes
        .first()
        .ok_or_else(|| CodecError::new(0, CodecErrorKind::Truncated))?;
    StructureTag::from_byte(b).ok_or_else(|| CodecError::new(0, CodecErrorKind::UnknownStructure(b)))
}

/// A signature block as it appears on the wire: `(signer-id, signature)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignatureBlock {
    pub signer: String,
    pub signature: Vec<u8>,
}

/// Walks any protocol structure and returns every signature block it contains,
/// descending into aggregates. Used by harnesses that audit who signed what
/// without knowing the structure kind in advance.
pub fn signature_blocks(bytes: &[u8]) -> Result<Vec<SignatureBlock>, CodecError> {
    let mut out = Vec::new();
    collect_signatures(bytes, 0, &mut out)?;
    Ok(out)
}

fn collect_signatures(
    bytes: &[u8],
    base: usize,
    out: &mut Vec<SignatureBlock>,
) -> Result<(), CodecError> {
    let mut cur = Cursor::with_base(bytes, base);
    let _tag = cur.u8()?;
    while !cur.is_empty() {
        let at = cur.offset();
        let ftag = cur.u8()?;
        let payload = cur.prefixed()?;
        let payload_at = cur.offset() - payload.len();
        match FieldTag::from_byte(ftag) {
            Some(FieldTag::Signature) => out.push(decode_signature_payload(payload, payload_at)?),
            Some(FieldTag::Aggregate) => {
                for (item_at, item) in read_list(payload, payload_at)? {
                    collect_signatures(item, item_at, out)?;
                }
            }
            Some(_) => {}
            None => {
                return Err(CodecError::new(
                    at,
                    CodecErrorKind::WrongField {
                        expected: FieldTag::Signature as u8,
                        found: ftag,
                    },
                ))
            }
        }
    }
    Ok(())
}

pub fn encode_signature_payload(signer: &str, signature: &[u8]) -> Vec<u8> {
    let mut payload = Vec::with_capacity(8 + signer.len() + signature.len());
    put_prefixed(&mut payload, signer.as_bytes());
    put_prefixed(&mut payload, signature);
    payload
}

pub fn decode_signature_payload(payload: &[u8], base: usize) -> Result<SignatureBlock, CodecError> {
    let mut cur = Cursor::with_base(payload, base);
    let id_at = cur.offset();
    let signer = cur.prefixed()?;
    let signer = std::str::from_utf8(signer)
        .map_err(|_| CodecError::new(id_at, CodecErrorKind::InvalidUtf8))?
        .to_owned();
    let signature = cur.prefixed()?.to_vec();
    cur.finish()?;
    Ok(SignatureBlock { signer, signature })
}
