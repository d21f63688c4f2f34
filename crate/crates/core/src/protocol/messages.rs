//! The signed structures exchanged during a draw.
//!
//! Each signature covers the canonical encoding of the structure as it stood
//! when it was signed: a first signature covers the tag and the body fields, a
//! countersignature covers the complete encoding of the structure it
//! countersigns (including earlier signatures), and a covering signature over
//! an aggregate covers the tag and the list of constituent encodings.

use crate::codec::{
    decode_signature_payload, encode_signature_payload, read_list, write_list, Canonical,
    CodecError, CodecErrorKind, Cursor, FieldTag, Reader, SignatureBlock, StructureTag, Writer,
};
use crate::crypto::{commit, CommitmentHash, KeyPair, Salt, HASH_LEN, SALT_LEN};
use crate::permutation::{Permutation, MAX_DOMAIN};

use super::abort::AbortCause;

/// A participant's name together with its signing key.
#[derive(Clone, Debug)]
pub struct Signer {
    pub name: String,
    pub key: KeyPair,
}

impl Signer {
    pub fn new(name: impl Into<String>, key: KeyPair) -> Self {
        Self {
            name: name.into(),
            key,
        }
    }

    pub fn sign(&self, message: &[u8]) -> SignatureBlock {
        SignatureBlock {
            signer: self.name.clone(),
            signature: self.key.sign(message),
        }
    }
}

/// A structure carrying one outermost signature.
pub trait Signed {
    /// The exact bytes the outermost signature covers.
    fn signing_bytes(&self) -> Vec<u8>;
    fn signature(&self) -> &SignatureBlock;
}

fn write_sig(w: &mut Writer, sig: &SignatureBlock) {
    w.field(
        FieldTag::Signature,
        &encode_signature_payload(&sig.signer, &sig.signature),
    );
}

fn read_sig(r: &mut Reader<'_>) -> Result<SignatureBlock, CodecError> {
    let (at, payload) = r.field(FieldTag::Signature)?;
    decode_signature_payload(payload, at)
}

fn read_bound(r: &mut Reader<'_>) -> Result<u64, CodecError> {
    let at = r.offset();
    let k = r.u64(FieldTag::K)?;
    if k == 0 || k > MAX_DOMAIN {
        return Err(CodecError::new(at, CodecErrorKind::OutOfRange("k")));
    }
    Ok(k)
}

fn read_hash(r: &mut Reader<'_>) -> Result<CommitmentHash, CodecError> {
    r.fixed::<HASH_LEN>(FieldTag::Hash).map(CommitmentHash::from_bytes)
}

fn read_salt(r: &mut Reader<'_>) -> Result<Salt, CodecError> {
    r.fixed::<SALT_LEN>(FieldTag::Salt).map(Salt::from_bytes)
}

fn permutation_payload(p: &Permutation) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 8 * p.as_slice().len());
    out.extend_from_slice(&(p.as_slice().len() as u32).to_be_bytes());
    for v in p.as_slice() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

fn read_permutation(r: &mut Reader<'_>) -> Result<Permutation, CodecError> {
    let (at, payload) = r.field(FieldTag::Permutation)?;
    let mut cur = Cursor::with_base(payload, at);
    let count = cur.u32()? as usize;
    let expected = count.checked_mul(8).and_then(|n| n.checked_add(4));
    if expected != Some(payload.len()) {
        return Err(CodecError::new(
            at,
            CodecErrorKind::BadLength {
                expected: expected.unwrap_or(usize::MAX),
                found: payload.len(),
            },
        ));
    }
    let mut mapping = Vec::with_capacity(count);
    for _ in 0..count {
        mapping.push(cur.u64()?);
    }
    Permutation::from_mapping(mapping)
        .map_err(|_| CodecError::new(at, CodecErrorKind::OutOfRange("permutation")))
}

/// Step 1: the initiator fixes the bound and the draw number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DrawAnnounce {
    pub k: u64,
    pub draw_no: u64,
    pub initiator_sig: SignatureBlock,
}

impl DrawAnnounce {
    pub fn body(k: u64, draw_no: u64) -> Vec<u8> {
        let mut w = Writer::new(Self::TAG);
        w.u64(FieldTag::K, k).u64(FieldTag::DrawNo, draw_no);
        w.finish()
    }

    pub fn sign(k: u64, draw_no: u64, signer: &Signer) -> Self {
        Self {
            k,
            draw_no,
            initiator_sig: signer.sign(&Self::body(k, draw_no)),
        }
    }
}

impl Canonical for DrawAnnounce {
    const TAG: StructureTag = StructureTag::DrawAnnounce;

    fn write_fields(&self, w: &mut Writer) {
        w.u64(FieldTag::K, self.k).u64(FieldTag::DrawNo, self.draw_no);
        write_sig(w, &self.initiator_sig);
    }

    fn read_fields(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            k: read_bound(r)?,
            draw_no: r.u64(FieldTag::DrawNo)?,
            initiator_sig: read_sig(r)?,
        })
    }
}

impl Signed for DrawAnnounce {
    fn signing_bytes(&self) -> Vec<u8> {
        Self::body(self.k, self.draw_no)
    }
    fn signature(&self) -> &SignatureBlock {
        &self.initiator_sig
    }
}

/// Steps 5 and 9 both publish `(draw №, hash sum)` signed by the owner; the
/// tag tells the two apart.
macro_rules! hash_commit {
    ($(#[$doc:meta])* $name:ident, $tag:expr) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq, Eq)]
        pub struct $name {
            pub draw_no: u64,
            pub hash: CommitmentHash,
            pub sig: SignatureBlock,
        }

        impl $name {
            pub fn body(draw_no: u64, hash: &CommitmentHash) -> Vec<u8> {
                let mut w = Writer::new(Self::TAG);
                w.u64(FieldTag::DrawNo, draw_no)
                    .field(FieldTag::Hash, hash.as_bytes());
                w.finish()
            }

            pub fn sign(draw_no: u64, hash: CommitmentHash, signer: &Signer) -> Self {
                let sig = signer.sign(&Self::body(draw_no, &hash));
                Self { draw_no, hash, sig }
            }
        }

        impl Canonical for $name {
            const TAG: StructureTag = $tag;

            fn write_fields(&self, w: &mut Writer) {
                w.u64(FieldTag::DrawNo, self.draw_no)
                    .field(FieldTag::Hash, self.hash.as_bytes());
                write_sig(w, &self.sig);
            }

            fn read_fields(r: &mut Reader<'_>) -> Result<Self, CodecError> {
                Ok(Self {
                    draw_no: r.u64(FieldTag::DrawNo)?,
                    hash: read_hash(r)?,
                    sig: read_sig(r)?,
                })
            }
        }

        impl Signed for $name {
            fn signing_bytes(&self) -> Vec<u8> {
                Self::body(self.draw_no, &self.hash)
            }
            fn signature(&self) -> &SignatureBlock {
                &self.sig
            }
        }
    };
}

hash_commit!(
    /// Step 5: the initiator's commitment to its number.
    InitiatorCommit,
    StructureTag::InitiatorCommit
);
hash_commit!(
    /// Step 9: a guarantor's commitment to its permutation.
    GuarantorCommit,
    StructureTag::GuarantorCommit
);

/// The initiator's hidden step-5 structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitiatorSecret {
    pub salt: Salt,
    pub draw_no: u64,
    pub number: u64,
}

impl InitiatorSecret {
    /// Preimage bytes after the salt: reveal tag, draw №, number.
    pub fn secret_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(StructureTag::InitiatorReveal);
        w.u64(FieldTag::DrawNo, self.draw_no)
            .u64(FieldTag::Number, self.number);
        w.finish()
    }

    pub fn commitment(&self) -> CommitmentHash {
        commit(&self.secret_bytes(), &self.salt)
    }
}

/// A guarantor's hidden step-9 structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuarantorSecret {
    pub salt: Salt,
    pub draw_no: u64,
    pub permutation: Permutation,
}

impl GuarantorSecret {
    /// Preimage bytes after the salt: reveal tag, draw №, permutation.
    pub fn secret_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(StructureTag::GuarantorReveal);
        w.u64(FieldTag::DrawNo, self.draw_no)
            .field(FieldTag::Permutation, &permutation_payload(&self.permutation));
        w.finish()
    }

    pub fn commitment(&self) -> CommitmentHash {
        commit(&self.secret_bytes(), &self.salt)
    }
}

/// Step 12: the initiator opens its commitment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitiatorReveal {
    pub secret: InitiatorSecret,
    pub sig: SignatureBlock,
}

impl InitiatorReveal {
    pub fn body(secret: &InitiatorSecret) -> Vec<u8> {
        let mut w = Writer::new(Self::TAG);
        w.field(FieldTag::Salt, secret.salt.as_bytes())
            .u64(FieldTag::DrawNo, secret.draw_no)
            .u64(FieldTag::Number, secret.number);
        w.finish()
    }

    pub fn sign(secret: InitiatorSecret, signer: &Signer) -> Self {
        let sig = signer.sign(&Self::body(&secret));
        Self { secret, sig }
    }

    pub fn opens(&self, hash: &CommitmentHash) -> bool {
        self.secret.commitment() == *hash
    }
}

impl Canonical for InitiatorReveal {
    const TAG: StructureTag = StructureTag::InitiatorReveal;

    fn write_fields(&self, w: &mut Writer) {
        w.field(FieldTag::Salt, self.secret.salt.as_bytes())
            .u64(FieldTag::DrawNo, self.secret.draw_no)
            .u64(FieldTag::Number, self.secret.number);
        write_sig(w, &self.sig);
    }

    fn read_fields(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            secret: InitiatorSecret {
                salt: read_salt(r)?,
                draw_no: r.u64(FieldTag::DrawNo)?,
                number: r.u64(FieldTag::Number)?,
            },
            sig: read_sig(r)?,
        })
    }
}

impl Signed for InitiatorReveal {
    fn signing_bytes(&self) -> Vec<u8> {
        Self::body(&self.secret)
    }
    fn signature(&self) -> &SignatureBlock {
        &self.sig
    }
}

/// Step 13: a guarantor opens its commitment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuarantorReveal {
    pub secret: GuarantorSecret,
    pub sig: SignatureBlock,
}

impl GuarantorReveal {
    pub fn body(secret: &GuarantorSecret) -> Vec<u8> {
        let mut w = Writer::new(Self::TAG);
        w.field(FieldTag::Salt, secret.salt.as_bytes())
            .u64(FieldTag::DrawNo, secret.draw_no)
            .field(FieldTag::Permutation, &permutation_payload(&secret.permutation));
        w.finish()
    }

    pub fn sign(secret: GuarantorSecret, signer: &Signer) -> Self {
        let sig = signer.sign(&Self::body(&secret));
        Self { secret, sig }
    }

    pub fn opens(&self, hash: &CommitmentHash) -> bool {
        self.secret.commitment() == *hash
    }
}

impl Canonical for GuarantorReveal {
    const TAG: StructureTag = StructureTag::GuarantorReveal;

    fn write_fields(&self, w: &mut Writer) {
        w.field(FieldTag::Salt, self.secret.salt.as_bytes())
            .u64(FieldTag::DrawNo, self.secret.draw_no)
            .field(
                FieldTag::Permutation,
                &permutation_payload(&self.secret.permutation),
            );
        write_sig(w, &self.sig);
    }

    fn read_fields(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            secret: GuarantorSecret {
                salt: read_salt(r)?,
                draw_no: r.u64(FieldTag::DrawNo)?,
                permutation: read_permutation(r)?,
            },
            sig: read_sig(r)?,
        })
    }
}

impl Signed for GuarantorReveal {
    fn signing_bytes(&self) -> Vec<u8> {
        Self::body(&self.secret)
    }
    fn signature(&self) -> &SignatureBlock {
        &self.sig
    }
}

/// A structure one more party signs on top of the existing signatures.
pub trait Countersignable: Canonical {
    const COUNTERSIGNED_TAG: StructureTag;
}

/// `inner` plus a signature over `inner`'s complete encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Countersigned<T> {
    pub inner: T,
    pub countersig: SignatureBlock,
}

impl<T: Countersignable> Countersigned<T> {
    pub fn sign(inner: T, signer: &Signer) -> Self {
        let countersig = signer.sign(&inner.encode());
        Self { inner, countersig }
    }
}

impl<T: Countersignable> Canonical for Countersigned<T> {
    const TAG: StructureTag = T::COUNTERSIGNED_TAG;

    fn write_fields(&self, w: &mut Writer) {
        self.inner.write_fields(w);
        write_sig(w, &self.countersig);
    }

    fn read_fields(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            inner: T::read_fields(r)?,
            countersig: read_sig(r)?,
        })
    }
}

impl<T: Countersignable> Signed for Countersigned<T> {
    fn signing_bytes(&self) -> Vec<u8> {
        self.inner.encode()
    }
    fn signature(&self) -> &SignatureBlock {
        &self.countersig
    }
}

/// A structure the initiator collects from every guarantor and redistributes.
pub trait Aggregatable: Canonical {
    const AGGREGATE_TAG: StructureTag;
}

/// Entries in ascending guarantor order plus the initiator's covering
/// signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aggregate<E> {
    pub entries: Vec<E>,
    pub covering: SignatureBlock,
}

impl<E: Aggregatable> Aggregate<E> {
    fn list_payload(entries: &[E]) -> Vec<u8> {
        let encoded: Vec<Vec<u8>> = entries.iter().map(Canonical::encode).collect();
        write_list(encoded.iter().map(Vec::as_slice))
    }

    pub fn body(entries: &[E]) -> Vec<u8> {
        let mut w = Writer::new(E::AGGREGATE_TAG);
        w.field(FieldTag::Aggregate, &Self::list_payload(entries));
        w.finish()
    }

    pub fn sign(entries: Vec<E>, signer: &Signer) -> Self {
        let covering = signer.sign(&Self::body(&entries));
        Self { entries, covering }
    }
}

impl<E: Aggregatable> Canonical for Aggregate<E> {
    const TAG: StructureTag = E::AGGREGATE_TAG;

    fn write_fields(&self, w: &mut Writer) {
        w.field(FieldTag::Aggregate, &Self::list_payload(&self.entries));
        write_sig(w, &self.covering);
    }

    fn read_fields(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let (at, payload) = r.field(FieldTag::Aggregate)?;
        let entries = read_list(payload, at)?
            .into_iter()
            .map(|(item_at, item)| E::decode_at(item, item_at))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            entries,
            covering: read_sig(r)?,
        })
    }
}

impl<E: Aggregatable> Signed for Aggregate<E> {
    fn signing_bytes(&self) -> Vec<u8> {
        Self::body(&self.entries)
    }
    fn signature(&self) -> &SignatureBlock {
        &self.covering
    }
}

impl Countersignable for DrawAnnounce {
    const COUNTERSIGNED_TAG: StructureTag = StructureTag::CounterSignedAnnounce;
}
impl Countersignable for InitiatorCommit {
    const COUNTERSIGNED_TAG: StructureTag = StructureTag::CountersignedCommit;
}
impl Countersignable for Aggregate<GuarantorCommit> {
    const COUNTERSIGNED_TAG: StructureTag = StructureTag::CountersignedHashAggregate;
}
impl Aggregatable for Countersigned<DrawAnnounce> {
    const AGGREGATE_TAG: StructureTag = StructureTag::AnnounceAggregate;
}
impl Aggregatable for Countersigned<InitiatorCommit> {
    const AGGREGATE_TAG: StructureTag = StructureTag::CommitAggregate;
}
impl Aggregatable for GuarantorCommit {
    const AGGREGATE_TAG: StructureTag = StructureTag::GuarantorHashAggregate;
}
impl Aggregatable for GuarantorReveal {
    const AGGREGATE_TAG: StructureTag = StructureTag::RevealAggregate;
}

/// Step 2.
pub type CounterSignedAnnounce = Countersigned<DrawAnnounce>;
/// Step 3.
pub type AnnounceAggregate = Aggregate<CounterSignedAnnounce>;
/// Step 6.
pub type CountersignedCommit = Countersigned<InitiatorCommit>;
/// Step 7.
pub type CommitAggregate = Aggregate<CountersignedCommit>;
/// Step 10.
pub type GuarantorHashAggregate = Aggregate<GuarantorCommit>;
/// Step 11.
pub type CountersignedHashAggregate = Countersigned<GuarantorHashAggregate>;
/// Step 14.
pub type RevealAggregate = Aggregate<GuarantorReveal>;

impl RevealAggregate {
    /// The revealed permutations in aggregate order, `φ₁` first.
    pub fn permutations(&self) -> Vec<Permutation> {
        self.entries
            .iter()
            .map(|e| e.secret.permutation.clone())
            .collect()
    }
}

/// Signed announcement that the sender has stopped participating.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorNotice {
    pub draw_no: u64,
    pub phase: u8,
    pub cause: AbortCause,
    pub culprit: Option<String>,
    pub sig: SignatureBlock,
}

impl ErrorNotice {
    fn write_body(w: &mut Writer, draw_no: u64, phase: u8, cause: AbortCause, culprit: Option<&str>) {
        w.u64(FieldTag::DrawNo, draw_no)
            .u64(FieldTag::Phase, u64::from(phase))
            .field(FieldTag::Cause, &[cause.code()])
            .field(FieldTag::Culprit, culprit.unwrap_or("").as_bytes());
    }

    pub fn sign(
        draw_no: u64,
        phase: u8,
        cause: AbortCause,
        culprit: Option<String>,
        signer: &Signer,
    ) -> Self {
        let mut w = Writer::new(Self::TAG);
        Self::write_body(&mut w, draw_no, phase, cause, culprit.as_deref());
        let sig = signer.sign(&w.finish());
        Self {
            draw_no,
            phase,
            cause,
            culprit,
            sig,
        }
    }
}

impl Canonical for ErrorNotice {
    const TAG: StructureTag = StructureTag::ErrorNotice;

    fn write_fields(&self, w: &mut Writer) {
        Self::write_body(w, self.draw_no, self.phase, self.cause, self.culprit.as_deref());
        write_sig(w, &self.sig);
    }

    fn read_fields(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let draw_no = r.u64(FieldTag::DrawNo)?;
        let phase_at = r.offset();
        let phase = r.u64(FieldTag::Phase)?;
        let phase = u8::try_from(phase)
            .ok()
            .filter(|p| (1..=15).contains(p))
            .ok_or_else(|| CodecError::new(phase_at, CodecErrorKind::OutOfRange("phase")))?;
        let (cause_at, cause) = r.field(FieldTag::Cause)?;
        let cause = match cause {
            [c] => AbortCause::from_code(*c),
            _ => None,
        }
        .ok_or_else(|| CodecError::new(cause_at, CodecErrorKind::OutOfRange("cause")))?;
        let (culprit_at, culprit) = r.field(FieldTag::Culprit)?;
        let culprit = std::str::from_utf8(culprit)
            .map_err(|_| CodecError::new(culprit_at, CodecErrorKind::InvalidUtf8))?;
        let culprit = (!culprit.is_empty()).then(|| culprit.to_owned());
        Ok(Self {
            draw_no,
            phase,
            cause,
            culprit,
            sig: read_sig(r)?,
        })
    }
}

impl Signed for ErrorNotice {
    fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(Self::TAG);
        Self::write_body(&mut w, self.draw_no, self.phase, self.cause, self.culprit.as_deref());
        w.finish()
    }
    fn signature(&self) -> &SignatureBlock {
        &self.sig
    }
}

/// Protocol step at which a structure kind is produced.
pub fn step_of(tag: StructureTag) -> u8 {
    use StructureTag::*;
    match tag {
        DrawAnnounce => 1,
        CounterSignedAnnounce => 2,
        AnnounceAggregate => 3,
        InitiatorCommit => 5,
        CountersignedCommit => 6,
        CommitAggregate => 7,
        GuarantorCommit => 9,
        GuarantorHashAggregate => 10,
        CountersignedHashAggregate => 11,
        InitiatorReveal => 12,
        GuarantorReveal => 13,
        RevealAggregate => 14,
        ErrorNotice | TranscriptHeader => 0,
    }
}

/// Any structure that can travel between participants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Announce(DrawAnnounce),
    CounterSignedAnnounce(CounterSignedAnnounce),
    AnnounceAggregate(AnnounceAggregate),
    InitiatorCommit(InitiatorCommit),
    CountersignedCommit(CountersignedCommit),
    CommitAggregate(CommitAggregate),
    GuarantorCommit(GuarantorCommit),
    HashAggregate(GuarantorHashAggregate),
    CountersignedHashAggregate(CountersignedHashAggregate),
    InitiatorReveal(InitiatorReveal),
    GuarantorReveal(GuarantorReveal),
    RevealAggregate(RevealAggregate),
    ErrorNotice(ErrorNotice),
}

impl Message {
    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        use StructureTag as T;
        Ok(match crate::codec::peek_tag(bytes)? {
            T::DrawAnnounce => Message::Announce(Canonical::decode(bytes)?),
            T::CounterSignedAnnounce => Message::CounterSignedAnnounce(Canonical::decode(bytes)?),
            T::AnnounceAggregate => Message::AnnounceAggregate(Canonical::decode(bytes)?),
            T::InitiatorCommit => Message::InitiatorCommit(Canonical::decode(bytes)?),
            T::CountersignedCommit => Message::CountersignedCommit(Canonical::decode(bytes)?),
            T::CommitAggregate => Message::CommitAggregate(Canonical::decode(bytes)?),
            T::GuarantorCommit => Message::GuarantorCommit(Canonical::decode(bytes)?),
            T::GuarantorHashAggregate => Message::HashAggregate(Canonical::decode(bytes)?),
            T::CountersignedHashAggregate => {
                Message::CountersignedHashAggregate(Canonical::decode(bytes)?)
            }
            T::InitiatorReveal => Message::InitiatorReveal(Canonical::decode(bytes)?),
            T::GuarantorReveal => Message::GuarantorReveal(Canonical::decode(bytes)?),
            T::RevealAggregate => Message::RevealAggregate(Canonical::decode(bytes)?),
            T::ErrorNotice => Message::ErrorNotice(Canonical::decode(bytes)?),
            found @ T::TranscriptHeader => {
                return Err(CodecError::new(
                    0,
                    CodecErrorKind::WrongStructure {
                        expected: T::DrawAnnounce,
                        found,
                    },
                ))
            }
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Message::Announce(m) => m.encode(),
            Message::CounterSignedAnnounce(m) => m.encode(),
            Message::AnnounceAggregate(m) => m.encode(),
            Message::InitiatorCommit(m) => m.encode(),
            Message::CountersignedCommit(m) => m.encode(),
            Message::CommitAggregate(m) => m.encode(),
            Message::GuarantorCommit(m) => m.encode(),
            Message::HashAggregate(m) => m.encode(),
            Message::CountersignedHashAggregate(m) => m.encode(),
            Message::InitiatorReveal(m) => m.encode(),
            Message::GuarantorReveal(m) => m.encode(),
            Message::RevealAggregate(m) => m.encode(),
            Message::ErrorNotice(m) => m.encode(),
        }
    }

    pub fn tag(&self) -> StructureTag {
        use StructureTag as T;
        match self {
            Message::Announce(_) => T::DrawAnnounce,
            Message::CounterSignedAnnounce(_) => T::CounterSignedAnnounce,
            Message::AnnounceAggregate(_) => T::AnnounceAggregate,
            Message::InitiatorCommit(_) => T::InitiatorCommit,
            Message::CountersignedCommit(_) => T::CountersignedCommit,
            Message::CommitAggregate(_) => T::CommitAggregate,
            Message::GuarantorCommit(_) => T::GuarantorCommit,
            Message::HashAggregate(_) => T::GuarantorHashAggregate,
            Message::CountersignedHashAggregate(_) => T::CountersignedHashAggregate,
            Message::InitiatorReveal(_) => T::InitiatorReveal,
            Message::GuarantorReveal(_) => T::GuarantorReveal,
            Message::RevealAggregate(_) => T::RevealAggregate,
            Message::ErrorNotice(_) => T::ErrorNotice,
        }
    }

    pub fn step(&self) -> u8 {
        step_of(self.tag())
    }

    /// Every draw number carried anywhere in the structure, aggregates
    /// included. An empty aggregate carries none.
    pub fn draw_numbers(&self) -> Vec<u64> {
        match self {
            Message::Announce(m) => vec![m.draw_no],
            Message::CounterSignedAnnounce(m) => vec![m.inner.draw_no],
            Message::AnnounceAggregate(m) => m.entries.iter().map(|e| e.inner.draw_no).collect(),
            Message::InitiatorCommit(m) => vec![m.draw_no],
            Message::CountersignedCommit(m) => vec![m.inner.draw_no],
            Message::CommitAggregate(m) => m.entries.iter().map(|e| e.inner.draw_no).collect(),
            Message::GuarantorCommit(m) => vec![m.draw_no],
            Message::HashAggregate(m) => m.entries.iter().map(|e| e.draw_no).collect(),
            Message::CountersignedHashAggregate(m) => {
                m.inner.entries.iter().map(|e| e.draw_no).collect()
            }
            Message::InitiatorReveal(m) => vec![m.secret.draw_no],
            Message::GuarantorReveal(m) => vec![m.secret.draw_no],
            Message::RevealAggregate(m) => m.entries.iter().map(|e| e.secret.draw_no).collect(),
            Message::ErrorNotice(m) => vec![m.draw_no],
        }
    }
}
