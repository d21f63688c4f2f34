//! The initiator and guarantor state machines.
//!
//! Participants are reactive: the transport hands them canonical bytes one
//! message at a time and they answer with a list of [`Output`]s. They never
//! touch the network or the clock themselves, which keeps every run
//! reproducible under a seeded [`EntropySource`].

mod abort;
mod guarantor;
mod initiator;
mod messages;
mod roster;

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::codec::SignatureBlock;
use crate::crypto::{sha3_256, EntropySource, KeyPair, HASH_LEN};
use crate::permutation::MAX_DOMAIN;

pub use abort::{Abort, AbortCause, AbortMode};
pub use guarantor::{Guarantor, PermutationChoice};
pub use initiator::{Initiator, NumberChoice};
pub use messages::{
    step_of, Aggregatable, Aggregate, AnnounceAggregate, CommitAggregate, CounterSignedAnnounce,
    Countersignable, Countersigned, CountersignedCommit, CountersignedHashAggregate, DrawAnnounce,
    ErrorNotice, GuarantorCommit, GuarantorHashAggregate, GuarantorReveal, GuarantorSecret,
    InitiatorCommit, InitiatorReveal, InitiatorSecret, Message, RevealAggregate, Signed, Signer,
};
pub use roster::{
    Member, PartyId, Role, Roster, RosterError, INITIATOR, MAX_GUARANTORS, RECOMMENDED_GUARANTORS,
};

/// Default wait-state timeout in simulated milliseconds.
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

/// Step at which the result is computed.
pub const RESULT_STEP: u8 = 15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("upper bound k must be in 1..={MAX_DOMAIN}, got {0}")]
    BadBound(u64),
    #[error("party {0} is not in the roster")]
    UnknownParty(PartyId),
    #[error("party {0} does not hold the role required here")]
    WrongRole(PartyId),
    #[error("signing key does not match the roster entry for {0:?}")]
    KeyMismatch(String),
    #[error("draw numbers start at 1")]
    ZeroDrawNumber,
}

/// Where an outgoing message is headed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Destination {
    Initiator,
    Guarantor(PartyId),
    AllGuarantors,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Send { to: Destination, bytes: Vec<u8> },
    Completed(u64),
    Aborted(Abort),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed(u64),
    Aborted(Abort),
}

impl Outcome {
    pub fn result(&self) -> Option<u64> {
        match self {
            Outcome::Completed(r) => Some(*r),
            Outcome::Aborted(_) => None,
        }
    }

    pub fn abort(&self) -> Option<&Abort> {
        match self {
            Outcome::Completed(_) => None,
            Outcome::Aborted(a) => Some(a),
        }
    }
}

/// Everything a participant needs besides its role-specific choices.
#[derive(Debug)]
pub struct PartyConfig {
    pub roster: Roster,
    pub me: PartyId,
    pub key: KeyPair,
    /// The draw number this party expects to run next, taken from its register.
    pub draw_no: u64,
    pub entropy: EntropySource,
    pub abort_mode: AbortMode,
    /// Signatures already known to be valid. Parties in one process may
    /// share a cache; entries only enter through a successful verification
    /// or through the key owner signing.
    pub verified: VerificationCache,
}

/// Memo of verified (public key, signature, message) triples, keyed by their
/// SHA3-256 digest.
#[derive(Clone, Debug, Default)]
pub struct VerificationCache(Arc<Mutex<HashSet<[u8; HASH_LEN]>>>);

impl VerificationCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn contains(&self, key: &[u8; HASH_LEN]) -> bool {
        self.0.lock().expect("cache lock").contains(key)
    }

    fn insert(&self, key: [u8; HASH_LEN]) {
        self.0.lock().expect("cache lock").insert(key);
    }

    pub fn len(&self) -> usize {
        self.0.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.0.lock().expect("cache lock").clear();
    }
}

/// A reactive protocol participant.
pub trait Participant {
    fn id(&self) -> PartyId;

    /// Kicks off the draw. Only the initiator produces anything here.
    fn start(&mut self) -> Vec<Output>;

    /// Processes one message received from `from`.
    fn handle(&mut self, from: PartyId, bytes: &[u8]) -> Vec<Output>;

    /// Called when the wait-state timer armed at the current epoch expires.
    fn on_timeout(&mut self) -> Vec<Output>;

    /// Stops an unfinished participant with `cause` at the step it awaits.
    /// Does nothing once the participant is terminal.
    fn halt(&mut self, cause: AbortCause) -> Vec<Output>;

    /// Increases whenever the participant advances; timers armed at an older
    /// epoch are stale.
    fn epoch(&self) -> u64;

    /// True while the participant is blocked on a peer.
    fn is_waiting(&self) -> bool;

    /// Step this participant expects to see next.
    fn awaited_step(&self) -> u8;

    fn outcome(&self) -> Option<&Outcome>;

    /// After completion: the broadcast structures of the draw, identical at
    /// every honest party. After an abort: every structure this party sent or
    /// processed, in processing order.
    fn transcript(&self) -> Vec<Vec<u8>>;

    fn draw_no(&self) -> u64;
}

/// Bookkeeping shared by both roles.
#[derive(Debug)]
pub(crate) struct Core {
    pub roster: Roster,
    pub me: PartyId,
    pub signer: Signer,
    pub draw_no: u64,
    pub entropy: EntropySource,
    pub mode: AbortMode,
    verified: VerificationCache,
    public_key: Vec<u8>,
    seen: HashSet<[u8; HASH_LEN]>,
    pending: Vec<(PartyId, Message, Vec<u8>)>,
    pub log: Vec<Vec<u8>>,
    pub outcome: Option<Outcome>,
    pub epoch: u64,
}

pub(crate) enum Admission {
    Process(Message),
    Ignore,
    Abort(Abort),
}

impl Core {
    pub fn new(cfg: PartyConfig, role: Role) -> Result<Self, ProtocolError> {
        let member = cfg
            .roster
            .member(cfg.me)
            .ok_or(ProtocolError::UnknownParty(cfg.me))?;
        if member.role != role {
            return Err(ProtocolError::WrongRole(cfg.me));
        }
        if member.public_key != cfg.key.public_key() {
            return Err(ProtocolError::KeyMismatch(member.name.clone()));
        }
        if cfg.draw_no == 0 {
            return Err(ProtocolError::ZeroDrawNumber);
        }
        let public_key = member.public_key.to_bytes();
        let signer = Signer::new(member.name.clone(), cfg.key);
        Ok(Self {
            roster: cfg.roster,
            me: cfg.me,
            signer,
            draw_no: cfg.draw_no,
            entropy: cfg.entropy,
            mode: cfg.abort_mode,
            verified: cfg.verified,
            public_key,
            seen: HashSet::new(),
            pending: Vec::new(),
            log: Vec::new(),
            outcome: None,
            epoch: 0,
        })
    }

    pub fn name(&self, id: PartyId) -> String {
        self.roster.name(id).to_owned()
    }

    fn cache_key(key: &[u8], sig: &SignatureBlock, msg: &[u8]) -> [u8; HASH_LEN] {
        let mut buf = Vec::with_capacity(key.len() + sig.signature.len() + msg.len() + 8);
        crate::codec::put_prefixed(&mut buf, key);
        crate::codec::put_prefixed(&mut buf, &sig.signature);
        buf.extend_from_slice(msg);
        sha3_256(&buf)
    }

    /// Signs `msg` and remembers the signature as verified.
    pub fn sign(&mut self, msg: &[u8]) -> SignatureBlock {
        let block = self.signer.sign(msg);
        self.verified
            .insert(Self::cache_key(&self.public_key, &block, msg));
        block
    }

    /// True iff `sig` names party `id` and verifies under its roster key.
    pub fn check(&mut self, id: PartyId, msg: &[u8], sig: &SignatureBlock) -> bool {
        let Some(member) = self.roster.member(id) else {
            return false;
        };
        if sig.signer != member.name {
            return false;
        }
        let pk = member.public_key.to_bytes();
        let key = Self::cache_key(&pk, sig, msg);
        if self.verified.contains(&key) {
            return true;
        }
        let ok = matches!(member.public_key.verify(msg, &sig.signature), Ok(true));
        if ok {
            self.verified.insert(key);
        }
        ok
    }

    pub fn check_signed<S: Signed>(&mut self, id: PartyId, s: &S) -> bool {
        self.check(id, &s.signing_bytes(), s.signature())
    }

    /// Decode, draw-number check and duplicate suppression, in that order.
    pub fn admit(&mut self, from: PartyId, bytes: &[u8], awaited: u8) -> Admission {
        let msg = match Message::decode(bytes) {
            Ok(m) => m,
            Err(_) => return Admission::Abort(Abort::new(awaited, AbortCause::DecodeError, None)),
        };
        if msg.draw_numbers().iter().any(|&d| d != self.draw_no) {
            return Admission::Abort(Abort::new(
                awaited,
                AbortCause::BadDrawNo,
                self.roster.member(from).map(|m| m.name.clone()),
            ));
        }
        if !self.seen.insert(sha3_256(bytes)) {
            return Admission::Ignore;
        }
        Admission::Process(msg)
    }

    pub fn defer(&mut self, from: PartyId, msg: Message, bytes: &[u8]) {
        self.pending.push((from, msg, bytes.to_vec()));
    }

    /// Removes the earliest deferred message whose step is now due.
    pub fn take_due(&mut self, awaited: u8) -> Option<(PartyId, Message, Vec<u8>)> {
        let pos = self.pending.iter().position(|(_, m, _)| m.step() <= awaited)?;
        Some(self.pending.remove(pos))
    }

    pub fn advance(&mut self) {
        self.epoch += 1;
    }

    /// Records a terminal abort and, in signed mode, the notice announcing it.
    pub fn abort(&mut self, abort: Abort, notify: Destination, out: &mut Vec<Output>) {
        if self.outcome.is_some() {
            return;
        }
        let mut abort = abort;
        abort.mode = self.mode;
        if self.mode == AbortMode::SignedError && abort.reported_by.is_none() {
            let notice = ErrorNotice::sign(
                self.draw_no,
                abort.phase,
                abort.cause,
                abort.culprit.clone(),
                &self.signer,
            );
            let bytes = crate::codec::Canonical::encode(&notice);
            self.log.push(bytes.clone());
            out.push(Output::Send {
                to: notify,
                bytes,
            });
        }
        self.outcome = Some(Outcome::Aborted(abort.clone()));
        self.advance();
        out.push(Output::Aborted(abort));
    }

    /// Validates a peer's notice; `Ok` carries the abort to adopt.
    pub fn adopt_notice(&mut self, notice: &ErrorNotice) -> Option<Abort> {
        let signer = self.roster.index_of(&notice.sig.signer)?;
        if !self.check_signed(signer, notice) {
            return None;
        }
        Some(Abort {
            phase: notice.phase,
            cause: notice.cause,
            culprit: notice.culprit.clone(),
            mode: self.mode,
            reported_by: Some(notice.sig.signer.clone()),
        })
    }

    pub fn complete(&mut self, result: u64, out: &mut Vec<Output>) {
        self.outcome = Some(Outcome::Completed(result));
        self.advance();
        out.push(Output::Completed(result));
    }
}

pub(crate) fn check_bound(k: u64) -> Result<(), ProtocolError> {
    if k == 0 || k > MAX_DOMAIN {
        Err(ProtocolError::BadBound(k))
    } else {
        Ok(())
    }
}
