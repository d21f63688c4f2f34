//! Third-party audit of a stored transcript.
//!
//! The auditor replays every check a participant makes, in step order, and
//! reports the earliest failure. It accepts both the published form of a
//! completed draw (broadcast structures only) and a party's full evidence log,
//! where individual replies appear next to the aggregates that carry them.

use std::fmt;

use crate::permutation::{apply_chain, Permutation};
use crate::protocol::{
    Aggregatable, Aggregate, AnnounceAggregate, CommitAggregate, CounterSignedAnnounce,
    CountersignedCommit, CountersignedHashAggregate, DrawAnnounce, ErrorNotice, GuarantorCommit,
    GuarantorHashAggregate, GuarantorReveal, InitiatorCommit, InitiatorReveal, Message, PartyId,
    RevealAggregate, Role, Roster, Signed, INITIATOR, RESULT_STEP,
};

use super::transcript::{DrawStatus, DrawTranscript};

/// Why a transcript failed verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VerifyCause {
    BadSignature,
    BadDrawNo,
    BadHash,
    DecodeError,
    /// A structure the outcome depends on is missing.
    Incomplete,
    /// The recomputed result differs from the one in the header.
    ResultMismatch,
    /// The header's roster is not the roster the auditor trusts.
    RosterMismatch,
    /// Header fields disagree with the structures.
    HeaderMismatch,
    /// A structure appears before one it depends on, or conflicts with an
    /// earlier one of the same kind.
    OutOfOrder,
}

impl VerifyCause {
    pub fn name(self) -> &'static str {
        match self {
            VerifyCause::BadSignature => "bad-signature",
            VerifyCause::BadDrawNo => "bad-draw-no",
            VerifyCause::BadHash => "bad-hash",
            VerifyCause::DecodeError => "decode-error",
            VerifyCause::Incomplete => "incomplete",
            VerifyCause::ResultMismatch => "result-mismatch",
            VerifyCause::RosterMismatch => "roster-mismatch",
            VerifyCause::HeaderMismatch => "header-mismatch",
            VerifyCause::OutOfOrder => "out-of-order",
        }
    }
}

impl fmt::Display for VerifyCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid {
        result: u64,
    },
    Invalid {
        /// Protocol step of the failing structure; 0 for header problems,
        /// 15 for the final result check.
        step: u8,
        cause: VerifyCause,
        culprit: Option<String>,
    },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid { .. })
    }

    fn invalid(step: u8, cause: VerifyCause, culprit: Option<String>) -> Self {
        Verdict::Invalid {
            step,
            cause,
            culprit,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid { result } => write!(f, "valid: result {result}"),
            Verdict::Invalid {
                step,
                cause,
                culprit,
            } => {
                write!(f, "invalid at step {step}: {cause}")?;
                if let Some(c) = culprit {
                    write!(f, " (participant {c})")?;
                }
                Ok(())
            }
        }
    }
}

/// Verifies a transcript file image. Malformed bytes yield
/// `invalid(decode-error)`, never a panic.
pub fn verify_transcript_bytes(bytes: &[u8], roster: &Roster) -> Verdict {
    match DrawTranscript::from_bytes(bytes) {
        Ok(t) => verify_transcript(&t, roster),
        Err(_) => Verdict::invalid(0, VerifyCause::DecodeError, None),
    }
}

/// Re-runs every participant check over `t` against the trusted `roster`.
pub fn verify_transcript(t: &DrawTranscript, roster: &Roster) -> Verdict {
    if &t.header.roster != roster {
        return Verdict::invalid(0, VerifyCause::RosterMismatch, None);
    }
    let mut audit = Audit::new(roster, t.header.draw_no, t.header.k);
    for bytes in &t.structures {
        if let Err(fail) = audit.structure(bytes) {
            return fail.into();
        }
    }
    match &t.header.status {
        DrawStatus::Completed(published) => match audit.result() {
            Err(fail) => fail.into(),
            Ok(result) if result == *published => Verdict::Valid { result },
            Ok(_) => Verdict::invalid(RESULT_STEP, VerifyCause::ResultMismatch, None),
        },
        DrawStatus::Aborted { phase, culprit, .. } => {
            Verdict::invalid(*phase, VerifyCause::Incomplete, culprit.clone())
        }
    }
}

struct Fail {
    step: u8,
    cause: VerifyCause,
    culprit: Option<String>,
}

impl From<Fail> for Verdict {
    fn from(f: Fail) -> Self {
        Verdict::invalid(f.step, f.cause, f.culprit)
    }
}

type Check = Result<(), Fail>;

struct Audit<'a> {
    roster: &'a Roster,
    draw_no: u64,
    k: u64,
    last_step: u8,
    announce: Option<DrawAnnounce>,
    announce_aggregated: bool,
    commit: Option<InitiatorCommit>,
    commit_aggregated: bool,
    guarantor_commits: Vec<Option<GuarantorCommit>>,
    hash_aggregate: Option<GuarantorHashAggregate>,
    number: Option<u64>,
    permutations: Vec<Option<Permutation>>,
    reveal_aggregated: bool,
}

impl<'a> Audit<'a> {
    fn new(roster: &'a Roster, draw_no: u64, k: u64) -> Self {
        let g = roster.guarantor_count();
        Self {
            roster,
            draw_no,
            k,
            last_step: 0,
            announce: None,
            announce_aggregated: false,
            commit: None,
            commit_aggregated: false,
            guarantor_commits: vec![None; g],
            hash_aggregate: None,
            number: None,
            permutations: vec![None; g],
            reveal_aggregated: false,
        }
    }

    fn fail(&self, step: u8, cause: VerifyCause, culprit: Option<PartyId>) -> Fail {
        Fail {
            step,
            cause,
            culprit: culprit.map(|id| self.roster.name(id).to_owned()),
        }
    }

    fn signed<S: Signed>(&self, step: u8, id: PartyId, s: &S) -> Check {
        let member = &self.roster.members()[id];
        let sig = s.signature();
        let ok = sig.signer == member.name
            && matches!(
                member.public_key.verify(&s.signing_bytes(), &sig.signature),
                Ok(true)
            );
        if ok {
            Ok(())
        } else {
            Err(self.fail(step, VerifyCause::BadSignature, Some(id)))
        }
    }

    /// Guarantor named by a signature block, for structures that appear
    /// outside an aggregate.
    fn signing_guarantor<S: Signed>(&self, step: u8, s: &S) -> Result<PartyId, Fail> {
        match self.roster.index_of(&s.signature().signer) {
            Some(id) if self.roster.members()[id].role == Role::Guarantor => Ok(id),
            _ => Err(self.fail(step, VerifyCause::BadSignature, None)),
        }
    }

    fn require<T>(&self, value: &Option<T>, step: u8) -> Result<(), Fail> {
        if value.is_some() {
            Ok(())
        } else {
            Err(self.fail(step, VerifyCause::Incomplete, None))
        }
    }

    fn entry_count<E: Aggregatable>(&self, step: u8, agg: &Aggregate<E>) -> Check {
        if agg.entries.len() != self.roster.guarantor_count() {
            return Err(self.fail(step, VerifyCause::Incomplete, Some(INITIATOR)));
        }
        Ok(())
    }

    fn structure(&mut self, bytes: &[u8]) -> Check {
        let msg = Message::decode(bytes)
            .map_err(|_| self.fail(self.last_step, VerifyCause::DecodeError, None))?;
        let step = msg.step();
        if msg.draw_numbers().iter().any(|&d| d != self.draw_no) {
            return Err(self.fail(step, VerifyCause::BadDrawNo, None));
        }
        if let Message::ErrorNotice(n) = &msg {
            return self.notice(n);
        }
        if step < self.last_step {
            return Err(self.fail(step, VerifyCause::OutOfOrder, None));
        }
        self.last_step = step;
        match msg {
            Message::Announce(m) => self.on_announce(m),
            Message::CounterSignedAnnounce(m) => {
                let id = self.signing_guarantor(2, &m)?;
                self.announce_reply(id, &m)
            }
            Message::AnnounceAggregate(m) => self.on_announce_aggregate(&m),
            Message::InitiatorCommit(m) => self.on_commit(m),
            Message::CountersignedCommit(m) => {
                let id = self.signing_guarantor(6, &m)?;
                self.commit_reply(id, &m)
            }
            Message::CommitAggregate(m) => self.on_commit_aggregate(&m),
            Message::GuarantorCommit(m) => {
                let id = self.signing_guarantor(9, &m)?;
                self.guarantor_commit(id, &m)
            }
            Message::HashAggregate(m) => self.on_hash_aggregate(m),
            Message::CountersignedHashAggregate(m) => self.on_hash_countersign(&m),
            Message::InitiatorReveal(m) => self.on_initiator_reveal(&m),
            Message::GuarantorReveal(m) => {
                let id = self.signing_guarantor(13, &m)?;
                self.guarantor_reveal(id, &m)
            }
            Message::RevealAggregate(m) => self.on_reveal_aggregate(&m),
            Message::ErrorNotice(_) => unreachable!("handled above"),
        }
    }

    fn notice(&self, n: &ErrorNotice) -> Check {
        let id = self
            .roster
            .index_of(&n.sig.signer)
            .ok_or_else(|| self.fail(n.phase, VerifyCause::BadSignature, None))?;
        self.signed(n.phase, id, n)
    }

    fn on_announce(&mut self, m: DrawAnnounce) -> Check {
        if let Some(prev) = &self.announce {
            return if *prev == m {
                Ok(())
            } else {
                Err(self.fail(1, VerifyCause::OutOfOrder, Some(INITIATOR)))
            };
        }
        self.signed(1, INITIATOR, &m)?;
        if m.k != self.k {
            return Err(self.fail(1, VerifyCause::HeaderMismatch, None));
        }
        self.announce = Some(m);
        Ok(())
    }

    fn announce_reply(&self, id: PartyId, m: &CounterSignedAnnounce) -> Check {
        self.require(&self.announce, 1)?;
        if Some(&m.inner) != self.announce.as_ref() {
            return Err(self.fail(2, VerifyCause::BadSignature, Some(id)));
        }
        self.signed(2, id, m)
    }

    fn on_announce_aggregate(&mut self, m: &AnnounceAggregate) -> Check {
        self.require(&self.announce, 1)?;
        self.entry_count(3, m)?;
        for (i, e) in m.entries.iter().enumerate() {
            self.announce_reply(i + 1, e)?;
        }
        self.signed(3, INITIATOR, m)?;
        self.announce_aggregated = true;
        Ok(())
    }

    fn on_commit(&mut self, m: InitiatorCommit) -> Check {
        if let Some(prev) = &self.commit {
            return if *prev == m {
                Ok(())
            } else {
                Err(self.fail(5, VerifyCause::OutOfOrder, Some(INITIATOR)))
            };
        }
        self.signed(5, INITIATOR, &m)?;
        self.commit = Some(m);
        Ok(())
    }

    fn commit_reply(&self, id: PartyId, m: &CountersignedCommit) -> Check {
        self.require(&self.commit, 5)?;
        if Some(&m.inner) != self.commit.as_ref() {
            return Err(self.fail(6, VerifyCause::BadSignature, Some(id)));
        }
        self.signed(6, id, m)
    }

    fn on_commit_aggregate(&mut self, m: &CommitAggregate) -> Check {
        self.require(&self.commit, 5)?;
        self.entry_count(7, m)?;
        for (i, e) in m.entries.iter().enumerate() {
            self.commit_reply(i + 1, e)?;
        }
        self.signed(7, INITIATOR, m)?;
        self.commit_aggregated = true;
        Ok(())
    }

    fn guarantor_commit(&mut self, id: PartyId, m: &GuarantorCommit) -> Check {
        self.signed(9, id, m)?;
        let slot = &mut self.guarantor_commits[id - 1];
        match slot {
            Some(prev) if prev != m => Err(self.fail(9, VerifyCause::BadHash, Some(id))),
            _ => {
                *slot = Some(m.clone());
                Ok(())
            }
        }
    }

    fn on_hash_aggregate(&mut self, m: GuarantorHashAggregate) -> Check {
        self.entry_count(10, &m)?;
        for (i, e) in m.entries.iter().enumerate() {
            self.guarantor_commit(i + 1, e)?;
        }
        self.signed(10, INITIATOR, &m)?;
        match &self.hash_aggregate {
            Some(prev) if *prev != m => Err(self.fail(10, VerifyCause::OutOfOrder, Some(INITIATOR))),
            _ => {
                self.hash_aggregate = Some(m);
                Ok(())
            }
        }
    }

    fn on_hash_countersign(&self, m: &CountersignedHashAggregate) -> Check {
        let id = self.signing_guarantor(11, m)?;
        self.require(&self.hash_aggregate, 10)?;
        if Some(&m.inner) != self.hash_aggregate.as_ref() {
            return Err(self.fail(11, VerifyCause::BadSignature, Some(id)));
        }
        self.signed(11, id, m)
    }

    fn on_initiator_reveal(&mut self, m: &InitiatorReveal) -> Check {
        self.require(&self.commit, 5)?;
        self.signed(12, INITIATOR, m)?;
        let committed = &self.commit.as_ref().expect("checked").hash;
        if m.secret.number >= self.k || !m.opens(committed) {
            return Err(self.fail(12, VerifyCause::BadHash, Some(INITIATOR)));
        }
        match self.number {
            Some(n) if n != m.secret.number => {
                Err(self.fail(12, VerifyCause::OutOfOrder, Some(INITIATOR)))
            }
            _ => {
                self.number = Some(m.secret.number);
                Ok(())
            }
        }
    }

    fn guarantor_reveal(&mut self, id: PartyId, m: &GuarantorReveal) -> Check {
        self.signed(13, id, m)?;
        let committed = self.guarantor_commits[id - 1]
            .as_ref()
            .ok_or_else(|| self.fail(9, VerifyCause::Incomplete, Some(id)))?;
        if m.secret.permutation.k() != self.k || !m.opens(&committed.hash) {
            return Err(self.fail(13, VerifyCause::BadHash, Some(id)));
        }
        self.permutations[id - 1] = Some(m.secret.permutation.clone());
        Ok(())
    }

    fn on_reveal_aggregate(&mut self, m: &RevealAggregate) -> Check {
        self.entry_count(14, m)?;
        for (i, e) in m.entries.iter().enumerate() {
            self.guarantor_reveal(i + 1, e)?;
        }
        self.signed(14, INITIATOR, m)?;
        self.reveal_aggregated = true;
        Ok(())
    }

    fn result(&self) -> Result<u64, Fail> {
        let gates = [
            (self.announce.is_some(), 1),
            (self.announce_aggregated, 3),
            (self.commit.is_some(), 5),
            (self.commit_aggregated, 7),
            (self.hash_aggregate.is_some(), 10),
            (self.number.is_some(), 12),
            (self.reveal_aggregated, 14),
        ];
        if let Some((_, step)) = gates.iter().find(|(present, _)| !present) {
            return Err(self.fail(*step, VerifyCause::Incomplete, None));
        }
        let perms: Vec<Permutation> = self.permutations.iter().flatten().cloned().collect();
        let a = self.number.expect("gated");
        apply_chain(&perms, a).map_err(|_| self.fail(RESULT_STEP, VerifyCause::BadHash, None))
    }
}
