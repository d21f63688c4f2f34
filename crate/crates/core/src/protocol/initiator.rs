use crate::codec::Canonical;
use crate::crypto::Salt;
use crate::permutation::apply_chain;

use super::{
    check_bound, Abort, AbortCause, Admission, AnnounceAggregate, CommitAggregate,
    Core, CounterSignedAnnounce, CountersignedCommit, CountersignedHashAggregate,
    Destination, DrawAnnounce, GuarantorCommit, GuarantorHashAggregate, GuarantorReveal,
    InitiatorCommit, InitiatorReveal, InitiatorSecret, Message, Outcome, Output, Participant,
    PartyConfig, PartyId, ProtocolError, RevealAggregate, Role,
};

/// How the initiator picks its number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NumberChoice {
    #[default]
    Random,
    /// Always `v mod k`.
    Fixed(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Idle,
    AnnounceCountersigns,
    CommitCountersigns,
    GuarantorCommits,
    HashCountersigns,
    Reveals,
    Done,
}

impl Stage {
    fn awaited(self) -> u8 {
        match self {
            Stage::Idle => 1,
            Stage::AnnounceCountersigns => 2,
            Stage::CommitCountersigns => 6,
            Stage::GuarantorCommits => 9,
            Stage::HashCountersigns => 11,
            Stage::Reveals => 13,
            Stage::Done => 15,
        }
    }
}

/// The party that opens the draw, contributes the number and relays
/// everything between guarantors.
#[derive(Debug)]
pub struct Initiator {
    core: Core,
    k: u64,
    choice: NumberChoice,
    stage: Stage,
    announce: Option<DrawAnnounce>,
    announce_replies: Vec<Option<CounterSignedAnnounce>>,
    secret: Option<InitiatorSecret>,
    commit: Option<InitiatorCommit>,
    commit_replies: Vec<Option<CountersignedCommit>>,
    guarantor_commits: Vec<Option<GuarantorCommit>>,
    hash_aggregate: Option<GuarantorHashAggregate>,
    hash_replies: Vec<Option<CountersignedHashAggregate>>,
    reveals: Vec<Option<GuarantorReveal>>,
    published: Vec<Vec<u8>>,
}

impl Initiator {
    pub fn new(cfg: PartyConfig, k: u64, choice: NumberChoice) -> Result<Self, ProtocolError> {
        check_bound(k)?;
        let core = Core::new(cfg, Role::Initiator)?;
        let g = core.roster.guarantor_count();
        Ok(Self {
            core,
            k,
            choice,
            stage: Stage::Idle,
            announce: None,
            announce_replies: vec![None; g],
            secret: None,
            commit: None,
            commit_replies: vec![None; g],
            guarantor_commits: vec![None; g],
            hash_aggregate: None,
            hash_replies: vec![None; g],
            reveals: vec![None; g],
            published: Vec::new(),
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// The hidden step-5 structure, once generated.
    pub fn secret(&self) -> Option<&InitiatorSecret> {
        self.secret.as_ref()
    }

    /// A correctly signed step-12 reveal carrying `number` instead of the
    /// committed one. Exists so adversarial harnesses can renege.
    pub fn substitute_reveal(&self, number: u64) -> Option<Vec<u8>> {
        let mut secret = self.secret.clone()?;
        secret.number = number;
        Some(InitiatorReveal::sign(secret, &self.core.signer).encode())
    }

    fn send_all(&mut self, bytes: Vec<u8>, publish: bool, out: &mut Vec<Output>) {
        self.core.log.push(bytes.clone());
        if publish {
            self.published.push(bytes.clone());
        }
        out.push(Output::Send {
            to: Destination::AllGuarantors,
            bytes,
        });
    }

    fn fail(&mut self, phase: u8, cause: AbortCause, culprit: Option<PartyId>, out: &mut Vec<Output>) {
        let culprit = culprit.map(|c| self.core.name(c));
        self.stage = Stage::Done;
        self.core
            .abort(Abort::new(phase, cause, culprit), Destination::AllGuarantors, out);
    }

    /// Step 1.
    fn announce(&mut self, out: &mut Vec<Output>) {
        let body = DrawAnnounce::body(self.k, self.core.draw_no);
        let sig = self.core.sign(&body);
        let announce = DrawAnnounce {
            k: self.k,
            draw_no: self.core.draw_no,
            initiator_sig: sig,
        };
        self.send_all(announce.encode(), true, out);
        self.announce = Some(announce);
        self.stage = Stage::AnnounceCountersigns;
        self.core.advance();
    }

    /// Step 5.
    fn commit_phase(&mut self, out: &mut Vec<Output>) {
        let number = match self.choice {
            NumberChoice::Random => self
                .core
                .entropy
                .next_below(self.k)
                .expect("bound validated at construction"),
            NumberChoice::Fixed(v) => v % self.k,
        };
        let secret = InitiatorSecret {
            salt: Salt::generate(&mut self.core.entropy),
            draw_no: self.core.draw_no,
            number,
        };
        let hash = secret.commitment();
        let sig = self.core.sign(&InitiatorCommit::body(self.core.draw_no, &hash));
        let commit = InitiatorCommit {
            draw_no: self.core.draw_no,
            hash,
            sig,
        };
        self.send_all(commit.encode(), true, out);
        self.secret = Some(secret);
        self.commit = Some(commit);
        self.stage = Stage::CommitCountersigns;
    }

    /// Steps 3, 7, 10 and 14: the covering signature over the collected replies.
    fn aggregate<E: super::Aggregatable + Clone>(
        &mut self,
        replies: &[Option<E>],
    ) -> super::Aggregate<E> {
        let entries: Vec<E> = replies.iter().flatten().cloned().collect();
        let body = super::Aggregate::body(&entries);
        let covering = self.core.sign(&body);
        super::Aggregate { entries, covering }
    }

    fn reply_slot(&self, from: PartyId) -> Option<usize> {
        self.core
            .roster
            .guarantor_ids()
            .contains(&from)
            .then(|| from - 1)
    }

    fn dispatch(&mut self, from: PartyId, msg: Message, bytes: &[u8], out: &mut Vec<Output>) {
        let awaited = self.stage.awaited();
        if let Message::ErrorNotice(notice) = &msg {
            match self.core.adopt_notice(notice) {
                Some(abort) => {
                    self.send_all(bytes.to_vec(), false, out);
                    self.stage = Stage::Done;
                    self.core.abort(abort, Destination::AllGuarantors, out);
                }
                None => self.fail(awaited, AbortCause::BadSignature, Some(from), out),
            }
            return;
        }
        let Some(slot) = self.reply_slot(from) else {
            return;
        };
        let step = msg.step();
        if !matches!(step, 2 | 6 | 9 | 11 | 13) || step < awaited {
            return;
        }
        if step > awaited {
            self.core.defer(from, msg, bytes);
            return;
        }
        self.core.log.push(bytes.to_vec());
        match msg {
            Message::CounterSignedAnnounce(m) => {
                if self.announce_replies[slot].is_some() {
                    return;
                }
                if Some(&m.inner) != self.announce.as_ref() || !self.core.check_signed(from, &m) {
                    return self.fail(2, AbortCause::BadSignature, Some(from), out);
                }
                self.announce_replies[slot] = Some(m);
                self.core.advance();
                if self.announce_replies.iter().all(Option::is_some) {
                    let agg: AnnounceAggregate = self.aggregate(&self.announce_replies.clone());
                    self.send_all(agg.encode(), true, out);
                    self.commit_phase(out);
                }
            }
            Message::CountersignedCommit(m) => {
                if self.commit_replies[slot].is_some() {
                    return;
                }
                if Some(&m.inner) != self.commit.as_ref() || !self.core.check_signed(from, &m) {
                    return self.fail(6, AbortCause::BadSignature, Some(from), out);
                }
                self.commit_replies[slot] = Some(m);
                self.core.advance();
                if self.commit_replies.iter().all(Option::is_some) {
                    let agg: CommitAggregate = self.aggregate(&self.commit_replies.clone());
                    self.send_all(agg.encode(), true, out);
                    self.stage = Stage::GuarantorCommits;
                }
            }
            Message::GuarantorCommit(m) => {
                if self.guarantor_commits[slot].is_some() {
                    return;
                }
                if !self.core.check_signed(from, &m) {
                    return self.fail(9, AbortCause::BadSignature, Some(from), out);
                }
                self.guarantor_commits[slot] = Some(m);
                self.core.advance();
                if self.guarantor_commits.iter().all(Option::is_some) {
                    let agg: GuarantorHashAggregate =
                        self.aggregate(&self.guarantor_commits.clone());
                    self.send_all(agg.encode(), true, out);
                    self.hash_aggregate = Some(agg);
                    self.stage = Stage::HashCountersigns;
                }
            }
            Message::CountersignedHashAggregate(m) => {
                if self.hash_replies[slot].is_some() {
                    return;
                }
                if Some(&m.inner) != self.hash_aggregate.as_ref()
                    || !self.core.check_signed(from, &m)
                {
                    return self.fail(11, AbortCause::BadSignature, Some(from), out);
                }
                self.hash_replies[slot] = Some(m);
                self.core.advance();
                if self.hash_replies.iter().all(Option::is_some) {
                    let secret = self.secret.clone().expect("committed before step 11");
                    let sig = self.core.sign(&InitiatorReveal::body(&secret));
                    let reveal = InitiatorReveal { secret, sig };
                    self.send_all(reveal.encode(), true, out);
                    self.stage = Stage::Reveals;
                }
            }
            Message::GuarantorReveal(m) => {
                if self.reveals[slot].is_some() {
                    return;
                }
                if !self.core.check_signed(from, &m) {
                    return self.fail(13, AbortCause::BadSignature, Some(from), out);
                }
                let committed = &self.guarantor_commits[slot]
                    .as_ref()
                    .expect("all commitments collected before step 13")
                    .hash;
                if m.secret.permutation.k() != self.k || !m.opens(committed) {
                    return self.fail(13, AbortCause::BadHash, Some(from), out);
                }
                self.reveals[slot] = Some(m);
                self.core.advance();
                if self.reveals.iter().all(Option::is_some) {
                    let agg: RevealAggregate = self.aggregate(&self.reveals.clone());
                    self.send_all(agg.encode(), true, out);
                    let result = self.result_of(&agg);
                    self.stage = Stage::Done;
                    self.core.complete(result, out);
                }
            }
            _ => {}
        }
    }

    fn result_of(&self, agg: &RevealAggregate) -> u64 {
        let a = self.secret.as_ref().expect("revealed").number;
        apply_chain(&agg.permutations(), a).expect("permutation sizes checked against k")
    }

    fn drain(&mut self, out: &mut Vec<Output>) {
        while self.core.outcome.is_none() {
            let Some((from, msg, bytes)) = self.core.take_due(self.stage.awaited()) else {
                break;
            };
            self.dispatch(from, msg, &bytes, out);
        }
    }

    fn missing(&self) -> Option<PartyId> {
        let slots: Vec<bool> = match self.stage {
            Stage::AnnounceCountersigns => self.announce_replies.iter().map(Option::is_some).collect(),
            Stage::CommitCountersigns => self.commit_replies.iter().map(Option::is_some).collect(),
            Stage::GuarantorCommits => self.guarantor_commits.iter().map(Option::is_some).collect(),
            Stage::HashCountersigns => self.hash_replies.iter().map(Option::is_some).collect(),
            Stage::Reveals => self.reveals.iter().map(Option::is_some).collect(),
            Stage::Idle | Stage::Done => return None,
        };
        slots.iter().position(|got| !got).map(|i| i + 1)
    }
}

impl Participant for Initiator {
    fn id(&self) -> PartyId {
        self.core.me
    }

    fn start(&mut self) -> Vec<Output> {
        let mut out = Vec::new();
        if self.stage == Stage::Idle {
            self.announce(&mut out);
            self.drain(&mut out);
        }
        out
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
                self.core.abort(abort, Destination::AllGuarantors, &mut out);
            }
            Admission::Process(msg) => {
                if self.stage == Stage::Idle && !matches!(msg, Message::ErrorNotice(_)) {
                    self.core.defer(from, msg, bytes);
                } else {
                    self.dispatch(from, msg, bytes, &mut out);
                }
                if self.stage != Stage::Idle {
                    self.drain(&mut out);
                }
            }
        }
        out
    }

    fn on_timeout(&mut self) -> Vec<Output> {
        let mut out = Vec::new();
        if self.is_waiting() {
            let phase = self.stage.awaited();
            let culprit = if phase > 11 { self.missing() } else { None };
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
        self.core.outcome.is_none() && self.stage != Stage::Idle
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
