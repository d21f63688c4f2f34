use std::fmt;

use thiserror::Error;

use crate::codec::{
    put_prefixed, Canonical, CodecError, CodecErrorKind, Cursor, FieldTag, Reader, StructureTag,
    Writer,
};
use crate::crypto::{sha3_256, Scheme, HASH_LEN};
use crate::protocol::{AbortCause, Outcome, Roster};

/// File magic of a stored transcript.
pub const TRANSCRIPT_MAGIC: [u8; 4] = *b"FDRW";
/// Current transcript format version.
pub const TRANSCRIPT_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("not a transcript file (bad magic)")]
    BadMagic,
    #[error("unsupported transcript version {0}")]
    Version(u8),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// How the recorded draw ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DrawStatus {
    Completed(u64),
    Aborted {
        phase: u8,
        cause: AbortCause,
        culprit: Option<String>,
    },
}

impl From<&Outcome> for DrawStatus {
    fn from(o: &Outcome) -> Self {
        match o {
            Outcome::Completed(r) => DrawStatus::Completed(*r),
            Outcome::Aborted(a) => DrawStatus::Aborted {
                phase: a.phase,
                cause: a.cause,
                culprit: a.culprit.clone(),
            },
        }
    }
}

impl fmt::Display for DrawStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DrawStatus::Completed(r) => write!(f, "result {r}"),
            DrawStatus::Aborted {
                phase,
                cause,
                culprit,
            } => {
                write!(f, "aborted at step {phase}: {cause}")?;
                if let Some(c) = culprit {
                    write!(f, " (culprit {c})")?;
                }
                Ok(())
            }
        }
    }
}

/// Self-describing preamble of a transcript: who took part and what came out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptHeader {
    pub roster: Roster,
    pub draw_no: u64,
    pub k: u64,
    pub status: DrawStatus,
}

impl TranscriptHeader {
    pub fn scheme(&self) -> Scheme {
        self.roster.scheme()
    }
}

impl Canonical for TranscriptHeader {
    const TAG: StructureTag = StructureTag::TranscriptHeader;

    fn write_fields(&self, w: &mut Writer) {
        w.field(FieldTag::Scheme, &[self.roster.scheme().id()])
            .field(FieldTag::Member, &self.roster.encode())
            .u64(FieldTag::DrawNo, self.draw_no)
            .u64(FieldTag::K, self.k);
        match &self.status {
            DrawStatus::Completed(r) => {
                w.u64(FieldTag::Result, *r);
            }
            DrawStatus::Aborted {
                phase,
                cause,
                culprit,
            } => {
                w.u64(FieldTag::Phase, u64::from(*phase))
                    .field(FieldTag::Cause, &[cause.code()])
                    .field(FieldTag::Culprit, culprit.as_deref().unwrap_or("").as_bytes());
            }
        }
    }

    fn read_fields(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let (scheme_at, scheme) = r.field(FieldTag::Scheme)?;
        let scheme = match scheme {
            [id] => Scheme::from_id(*id).ok(),
            _ => None,
        }
        .ok_or_else(|| CodecError::new(scheme_at, CodecErrorKind::OutOfRange("scheme")))?;
        let (roster_at, roster) = r.field(FieldTag::Member)?;
        let roster = Roster::decode(scheme, roster, roster_at)?;
        let draw_no = r.u64(FieldTag::DrawNo)?;
        let k = r.u64(FieldTag::K)?;
        let status = if r.next_is(FieldTag::Result) {
            DrawStatus::Completed(r.u64(FieldTag::Result)?)
        } else {
            let phase_at = r.offset();
            let phase = u8::try_from(r.u64(FieldTag::Phase)?)
                .map_err(|_| CodecError::new(phase_at, CodecErrorKind::OutOfRange("phase")))?;
            let (cause_at, cause) = r.field(FieldTag::Cause)?;
            let cause = match cause {
                [c] => AbortCause::from_code(*c),
                _ => None,
            }
            .ok_or_else(|| CodecError::new(cause_at, CodecErrorKind::OutOfRange("cause")))?;
            let (culprit_at, culprit) = r.field(FieldTag::Culprit)?;
            let culprit = std::str::from_utf8(culprit)
                .map_err(|_| CodecError::new(culprit_at, CodecErrorKind::InvalidUtf8))?;
            DrawStatus::Aborted {
                phase,
                cause,
                culprit: (!culprit.is_empty()).then(|| culprit.to_owned()),
            }
        };
        Ok(Self {
            roster,
            draw_no,
            k,
            status,
        })
    }
}

/// Everything exchanged in one draw, as canonical bytes, plus its header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DrawTranscript {
    pub header: TranscriptHeader,
    pub structures: Vec<Vec<u8>>,
}

impl DrawTranscript {
    /// `FDRW`, version byte, length-prefixed header, then length-prefixed
    /// structures in exchange order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = TRANSCRIPT_MAGIC.to_vec();
        out.push(TRANSCRIPT_VERSION);
        put_prefixed(&mut out, &self.header.encode());
        for s in &self.structures {
            put_prefixed(&mut out, s);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TranscriptError> {
        if bytes.len() < 5 || bytes[..4] != TRANSCRIPT_MAGIC {
            return Err(TranscriptError::BadMagic);
        }
        if bytes[4] != TRANSCRIPT_VERSION {
            return Err(TranscriptError::Version(bytes[4]));
        }
        let mut cur = Cursor::with_base(&bytes[5..], 5);
        let header_at = cur.offset() + 4;
        let header = TranscriptHeader::decode_at(cur.prefixed()?, header_at)?;
        let mut structures = Vec::new();
        while !cur.is_empty() {
            structures.push(cur.prefixed()?.to_vec());
        }
        Ok(Self { header, structures })
    }

    /// SHA3-256 of the file encoding, as recorded in the index.
    pub fn digest(&self) -> [u8; HASH_LEN] {
        sha3_256(&self.to_bytes())
    }
}
