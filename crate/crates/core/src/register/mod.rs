//! The append-only draw register and third-party transcript verification.
//!
//! Every party keeps a register of the draws it took part in. Draw numbers
//! are global to a roster, start at 1 and have no gaps; an aborted draw still
//! consumes its number. The register only stores digests, the transcripts
//! themselves live next to it in a [`RegisterStore`].

mod store;
mod transcript;
mod verify;

use std::fmt;

use thiserror::Error;

use crate::crypto::HASH_LEN;
use crate::protocol::Roster;

pub use store::{RegisterStore, StoreError, INDEX_FILE};
pub use transcript::{
    DrawStatus, DrawTranscript, TranscriptError, TranscriptHeader, TRANSCRIPT_MAGIC,
    TRANSCRIPT_VERSION,
};
pub use verify::{verify_transcript, verify_transcript_bytes, Verdict, VerifyCause};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegisterError {
    #[error("draw {got} would leave a gap; next expected draw is {expected}")]
    Gap { expected: u64, got: u64 },
    #[error("draw {0} is already registered")]
    Duplicate(u64),
    #[error("transcript for draw {draw_no} does not verify: {verdict}")]
    NotVerified { draw_no: u64, verdict: Verdict },
    #[error("malformed index line {line}: {reason}")]
    Index { line: usize, reason: String },
}

/// File name under which a draw's transcript is stored.
pub fn transcript_file_name(draw_no: u64) -> String {
    format!("draw-{draw_no:06}.fdrw")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryOutcome {
    Result(u64),
    Aborted,
}

impl fmt::Display for EntryOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryOutcome::Result(r) => write!(f, "{r}"),
            EntryOutcome::Aborted => f.write_str("ABORT"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterEntry {
    pub draw_no: u64,
    pub k: u64,
    pub outcome: EntryOutcome,
    /// Transcript file name, relative to the register directory.
    pub file: String,
    /// SHA3-256 of the transcript file.
    pub digest: [u8; HASH_LEN],
}

impl RegisterEntry {
    /// `draw_no k result|ABORT filename sha3hex`
    pub fn index_line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.draw_no,
            self.k,
            self.outcome,
            self.file,
            hex::encode(self.digest)
        )
    }

    pub fn parse_index_line(line: &str, line_no: usize) -> Result<Self, RegisterError> {
        let bad = |reason: &str| RegisterError::Index {
            line: line_no,
            reason: reason.to_owned(),
        };
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [draw_no, k, outcome, file, digest] = parts[..] else {
            return Err(bad("expected five fields"));
        };
        let draw_no = draw_no.parse().map_err(|_| bad("draw number"))?;
        let k = k.parse().map_err(|_| bad("bound"))?;
        let outcome = match outcome {
            "ABORT" => EntryOutcome::Aborted,
            r => EntryOutcome::Result(r.parse().map_err(|_| bad("result"))?),
        };
        let digest = hex::decode(digest)
            .ok()
            .and_then(|d| <[u8; HASH_LEN]>::try_from(d).ok())
            .ok_or_else(|| bad("digest"))?;
        Ok(Self {
            draw_no,
            k,
            outcome,
            file: file.to_owned(),
            digest,
        })
    }
}

/// One party's record of past draws.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DrawRegister {
    entries: Vec<RegisterEntry>,
}

impl DrawRegister {
    pub fn new() -> Self {
        Self::default()
    }

    /// The number the next draw must carry. Not consumed until [`append`].
    ///
    /// [`append`]: DrawRegister::append
    pub fn next_draw_number(&self) -> u64 {
        self.entries.last().map_or(1, |e| e.draw_no + 1)
    }

    pub fn entries(&self) -> &[RegisterEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, draw_no: u64) -> Option<&RegisterEntry> {
        let i = usize::try_from(draw_no.checked_sub(1)?).ok()?;
        self.entries.get(i)
    }

    fn check_next(&self, draw_no: u64) -> Result<(), RegisterError> {
        let expected = self.next_draw_number();
        if draw_no < expected {
            Err(RegisterError::Duplicate(draw_no))
        } else if draw_no > expected {
            Err(RegisterError::Gap {
                expected,
                got: draw_no,
            })
        } else {
            Ok(())
        }
    }

    /// Records a draw. A completed draw must verify against `roster`; an
    /// aborted one is kept as evidence.
    pub fn append(
        &mut self,
        transcript: &DrawTranscript,
        roster: &Roster,
    ) -> Result<&RegisterEntry, RegisterError> {
        let header = &transcript.header;
        self.check_next(header.draw_no)?;
        let outcome = match header.status {
            DrawStatus::Completed(result) => {
                let verdict = verify_transcript(transcript, roster);
                if verdict != (Verdict::Valid { result }) {
                    return Err(RegisterError::NotVerified {
                        draw_no: header.draw_no,
                        verdict,
                    });
                }
                EntryOutcome::Result(result)
            }
            DrawStatus::Aborted { .. } => EntryOutcome::Aborted,
        };
        self.entries.push(RegisterEntry {
            draw_no: header.draw_no,
            k: header.k,
            outcome,
            file: transcript_file_name(header.draw_no),
            digest: transcript.digest(),
        });
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Restores an entry read back from an index file.
    pub fn push_entry(&mut self, entry: RegisterEntry) -> Result<(), RegisterError> {
        self.check_next(entry.draw_no)?;
        self.entries.push(entry);
        Ok(())
    }

    pub fn to_index(&self) -> String {
        self.entries
            .iter()
            .map(|e| e.index_line() + "\n")
            .collect()
    }

    pub fn from_index(text: &str) -> Result<Self, RegisterError> {
        let mut reg = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            reg.push_entry(RegisterEntry::parse_index_line(line, i + 1)?)?;
        }
        Ok(reg)
    }
}
