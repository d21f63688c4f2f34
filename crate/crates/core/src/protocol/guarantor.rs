use crate::codec::Canonical;
use crate::crypto::Salt;
use crate::permutation::{apply_chain, Permutation};

use super::{
    Abort, AbortCause, Admission, AnnounceAggregate, CommitAggregate, Core,
    CounterSignedAnnounce, Countersigned, CountersignedCommit, CountersignedHashAggregate,
    Destination, DrawAnnounce, GuarantorCommit, GuarantorHashAggregate, GuarantorReveal,
    GuarantorSecret, InitiatorCommit, InitiatorReveal, Message, Outcome, Output, Participant,
    PartyConfig, PartyId, ProtocolError, RevealAggregate, Role, Signed, INITIATOR,
};

/// How a guarantor picks its permutation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PermutationChoice {
    #[default]
    Random,
    /// Always the rotation `x ↦ (x + v) mod k`; `Fixed(0)` is the identity.
    Fixed(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Announce,
    AnnounceAggregate,
    InitiatorCommit,
    CommitAggregate,
    HashAggregate,
    InitiatorReveal,
    RevealAggregate,
    Done,
}

impl Stage {
    fn awaited(self) -> u8 {
        match self {
            Stage::Announce => 1,
            Stage::AnnounceAggregate => 3,
            Stage::InitiatorCommit => 5,
            Stage::CommitAggregate => 7,
            Stage::HashAggregate => 10,
            Stage::InitiatorReveal => 12,
            Stage::RevealAggregate => 14,
            Stage::Done => 15,
        }
    }
}

/// A party that countersigns every phase and contributes a permutation.
#[derive(Debug)]
pub struct Guarantor {
    core: Core,
    choice: PermutationChoice,
    stage: Stage,
    announce: Option<DrawAnnounce>,
    my_announce_reply: Option<CounterSignedAnnounce>,
    initiator_commit: Option<InitiatorCommit>,
    my_commit_reply: Option<CountersignedCommit>,
    secret: Option<GuarantorSecret>,
    my_commit: Option<GuarantorCommit>,
    hash_aggregate: Option<GuarantorHashAggregate>,
    initiator_number: Option<u64>,
    my_reveal: Option<GuarantorReveal>,
    published: Vec<Vec<u8>>,
}

impl Guarantor {
    pub fn new(cfg: PartyConfig, choice: PermutationChoice) -> Result<Self, ProtocolError> {
        Ok(Self {
            core: Core::new(cfg, Role::Guarantor)?,
            choice,
            stage: Stage::Announce,
            announce: None,
            my_announce_reply: None,
            initiator_commit: None,
            my_commit_reply: None,
            secret: None,
            my_commit: None,
            hash_aggregate: None,
            initiator_number: None,
            my_reveal: None,
            published: Vec::new(),
        })
    }

    /// The announced bound, once the announce has been accepted.
    pub fn k(&self) -> Option<u64> {
        self.announce.as_ref().map(|a| a.k)
    }

    /// The hidden step-9 structure, once generated.
    pub fn secret(&self) -> Option<&GuarantorSecret> {
        self.secret.as_ref()
    }

    /// A correctly signed step-13 reveal carrying `permutation` instead of the
    /// committed one. Exists so adversarial harnesses can renege.
    pub fn substitute_reveal(&self, permutation: Permutation) -> Option<Vec<u8>> {
        let mut secret = self.secret.clone()?;
        secret.permutation = permutation;
        Some(GuarantorReveal::sign(secret, &self.core.signer).encode())
    }

    fn send(&mut self, bytes: Vec<u8>, out: &mut Vec<Output>) {
        self.core.log.push(bytes.clone());
        out.push(Output::Send {
            to: Destination::Initiator,
            bytes,
        });
    }

    fn fail(&mut self, phase: u8, cause: AbortCause, culprit: Option<PartyId>, out: &mut Vec<Output>) {
        let culprit = culprit.map(|c| self.core.name(c));
        self.stage = Stage::Done;
        self.core
            .abort(Abort::new(phase, cause, culprit), Destination::Initiator, out);
    }

    fn countersign<T: super::Countersignable + Clone>(&mut self, inner: &T) -> Countersigned<T> {
        let countersig = self.core.sign(&inner.encode());
        Countersigned {
            inner: inner.clone(),
            countersig,
        }
    }

    /// Checks the covering signature and that entry `i` was produced by
    /// guarantor `i + 1`.
    fn aggregate_ok<E>(&mut self, agg: &super::Aggregate<E>) -> bool
    where
        E: super::Aggregatable + Signed,
    {
        if agg.entries.len() != self.core.roster.guarantor_count()
            || !self.core.check_signed(INITIATOR, agg)
        {
            return false;
        }
        agg.entries
            .iter()
            .enumerate()
            .all(|(i, e)| self.core.check_signed(i + 1, e))
    }

    /// Step 2.
    fn on_announce(&mut self, m: DrawAnnounce, out: &mut Vec<Output>) {
        if !self.core.check_signed(INITIATOR, &m) {
            return self.fail(1, AbortCause::BadSignature, Some(INITIATOR), out);
        }
        let reply = self.countersign(&m);
        self.announce = Some(m);
        self.send(reply.encode(), out);
        self.my_announce_reply = Some(reply);
        self.stage = Stage::AnnounceAggregate;
    }

    /// Step 4.
    fn on_announce_aggregate(&mut self, m: AnnounceAggregate, out: &mut Vec<Output>) {
        let consistent = m.entries.iter().all(|e| Some(&e.inner) == self.announce.as_ref())
            && m.entries.get(self.core.me - 1) == self.my_announce_reply.as_ref();
        if !consistent || !self.aggregate_ok(&m) {
            return self.fail(3, AbortCause::BadSignature, Some(INITIATOR), out);
        }
        self.stage = Stage::InitiatorCommit;
    }

    /// Step 6.
    fn on_initiator_commit(&mut self, m: InitiatorCommit, out: &mut Vec<Output>) {
        if !self.core.check_signed(INITIATOR, &m) {
            return self.fail(5, AbortCause::BadSignature, Some(INITIATOR), out);
        }
        let reply = self.countersign(&m);
        self.initiator_commit = Some(m);
        self.send(reply.encode(), out);
        self.my_commit_reply = Some(reply);
        self.stage = Stage::CommitAggregate;
    }

    /// Step 8, then step 9.
    fn on_commit_aggregate(&mut self, m: CommitAggregate, out: &mut Vec<Output>) {
        let consistent = m
            .entries
            .iter()
            .all(|e| Some(&e.inner) == self.initiator_commit.as_ref())
            && m.entries.get(self.core.me - 1) == self.my_commit_reply.as_ref();
        if !consistent || !self.aggregate_ok(&m) {
            return self.fail(7, AbortCause::BadSignature, Some(INITIATOR), out);
        }
        self.commit_phase(out);
    }

    fn commit_phase(&mut self, out: &mut Vec<Output>) {
        let k = self.k().expect("announce accepted before step 9");
        let permutation = match self.choice {
            PermutationChoice::Random => Permutation::random(k, &mut self.core.entropy),
            PermutationChoice::Fixed(v) => Permutation::rotation(k, v % k),
        }
        .expect("bound validated by the codec");
        let secret = GuarantorSecret {
            salt: Salt::generate(&mut self.core.entropy),
            draw_no: self.core.draw_no,
            permutation,
        };
        let hash = secret.commitment();
        let sig = self.core.sign(&GuarantorCommit::body(self.core.draw_no, &hash));
        let commit = GuarantorCommit {
            draw_no: self.core.draw_no,
            hash,
            sig,
        };
        self.send(commit.encode(), out);
        self.secret = Some(secret);
        self.my_commit = Some(commit);
        self.stage = Stage::HashAggregate;
    }

    /// Step 11.
    fn on_hash_aggregate(&mut self, m: GuarantorHashAggregate, out: &mut Vec<Output>) {
        if !self.aggregate_ok(&m) {
            return self.fail(10, AbortCause::BadSignature, Some(INITIATOR), out);
        }
        if m.entries.get(self.core.me - 1) != self.my_commit.as_ref() {
            return self.fail(10, AbortCause::BadHash, Some(INITIATOR), out);
        }
        let reply: CountersignedHashAggregate = self.countersign(&m);
        self.hash_aggregate = Some(m);
        self.send(reply.encode(), out);
        self.stage = Stage::InitiatorReveal;
    }

    /// Checks the initiator's opening, then step 13.
    fn on_initiator_reveal(&mut self, m: InitiatorReveal, out: &mut Vec<Output>) {
        if !self.core.check_signed(INITIATOR, &m) {
            return self.fail(12, AbortCause::BadSignature, Some(INITIATOR), out);
        }
        let k = self.k().expect("announce accepted");
        let committed = &self.initiator_commit.as_ref().expect("commit accepted").hash;
        if m.secret.number >= k || !m.opens(committed) {
            return self.fail(12, AbortCause::BadHash, Some(INITIATOR), out);
        }
        self.initiator_number = Some(m.secret.number);
        let secret = self.secret.clone().expect("committed before step 13");
        let sig = self.core.sign(&GuarantorReveal::body(&secret));
        let reveal = GuarantorReveal { secret, sig };
        self.send(reveal.encode(), out);
        self.my_reveal = Some(reveal);
        self.stage = Stage::RevealAggregate;
    }

    /// Step 15: every reveal is re-checked against its own commitment.
    fn on_reveal_aggregate(&mut self, m: RevealAggregate, out: &mut Vec<Output>) {
        if !self.aggregate_ok(&m) {
            return self.fail(14, AbortCause::BadSignature, Some(INITIATOR), out);
        }
        let k = self.k().expect("announce accepted");
        let hashes = &self.hash_aggregate.as_ref().expect("hashes accepted").entries;
        if let Some(i) = m
            .entries
            .iter()
            .zip(hashes)
            .position(|(r, h)| r.secret.permutation.k() != k || !r.opens(&h.hash))
        {
            return self.fail(14, AbortCause::BadHash, Some(i + 1), out);
        }
        let a = self.initiator_number.expect("initiator reveal accepted");
        let result = apply_chain(&m.permutations(), a).expect("sizes checked against k");
        self.stage = Stage::Done;
        self.core.complete(result, out);
    }

    fn dispatch(&mut self, from: PartyId, msg: Message, bytes: &[u8], out: &mut Vec<Output>) {
        let awaited = self.stage.awaited();
        if let Message::ErrorNotice(notice) = &msg {
            match self.core.adopt_notice(notice) {
                Some(abort) => {
                    self.core.log.push(bytes.to_vec());
                    self.stage = Stage::Done;
                    self.core.abort(abort, Destination::Initiator, out);
                }
                None => self.fail(awaited, AbortCause::BadSignature, Some(from), out),
            }
            return;
        }
        if from != INITIATOR {
            return;
        }
        let step = msg.step();
        if !matches!(step, 1 | 3 | 5 | 7 | 10 | 12 | 14) || step < awaited {
            return;
        }
        if step > awaited {
            self.core.defer(from, msg, bytes);
            return;
        }
        self.core.log.push(bytes.to_vec());
        self.published.push(bytes.to_vec());
        self.core.advance();
        match msg {
            Message::Announce(m) => self.on_announce(m, out),
            Message::AnnounceAggregate(m) => self.on_announce_aggregate(m, out),
            Message::InitiatorCommit(m) => self.on_initiator_commit(m, out),
            Message::CommitAggregate(m) => self.on_commit_aggregate(m, out),
            Message::HashAggregate(m) => self.on_hash_aggregate(m, out),
            Message::InitiatorReveal(m) => self.on_initiator_reveal(m, out),
            Message::RevealAggregate(m) => self.on_reveal_aggregate(m, out),
            _ => {}
        }
    }

    fn drain(&mut self, out: &mut Vec<Output>) {
        while self.core.outcome.is_none() {
            let Some((from, msg, bytes)) = self.core.take_due(self.stage.awaited()) else {
                break;
            };
            self.dispatch(from, msg, &bytes, out);
        }
    }
}

impl Participant for Guarantor {
    fn id(&self) -> PartyId {
        self.core.me
    }

    fn start(&mut self) -> Vec<Output> {
        Vec::new()
    }

    fn handle(&mut self, from: PartyId, bytes: &[u8]) -> Vec<Output> {
        let mut out = Vec::new();
        if self.core.outcome.is_some() {
            return out;
        }
        match self.core.admit(from, bytes, self.stage.awaited()) {
            Admission::Ignore => {}
            Admission::Abort(abort) => {
                self.core.log.push(bytes.to_vec());
                self.stage = Stage::Done;
                self.core.abort(abort, Destination::Initiator, &mut out);
            }
            Admission::Process(msg) => {
                self.dispatch(from, msg, bytes, &mut out);
                self.drain(&mut out);
            }
        }
        out
    }

    fn on_timeout(&mut self) -> Vec<Output> {
        let mut out = Vec::new();
        if self.is_waiting() {
            let phase = self.stage.awaited();
            let culprit = (phase > 11).then_some(INITIATOR);
            self.fail(phase, AbortCause::MissingPeer, culprit, &mut out);
        }
        out
    }

    fn halt(&mut self, cause: AbortCause) -> Vec<Output> {
        let mut out = Vec::new();
        if self.core.outcome.is_none() {
            let phase = self.stage.awaited();
            self.fail(phase, cause, None, &mut out);
        }
        out
    }

    fn epoch(&self) -> u64 {
        self.core.epoch
    }

    fn is_waiting(&self) -> bool {
        self.core.outcome.is_none()
    }

    fn awaited_step(&self) -> u8 {
        self.stage.awaited()
    }

    fn outcome(&self) -> Option<&Outcome> {
        self.core.outcome.as_ref()
    }

    fn transcript(&self) -> Vec<Vec<u8>> {
        match self.core.outcome {
            Some(Outcome::Completed(_)) => self.published.clone(),
            _ => self.core.log.clone(),
        }
    }

    fn draw_no(&self) -> u64 {
        self.core.draw_no
    }
}
