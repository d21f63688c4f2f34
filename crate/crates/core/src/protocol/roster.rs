use thiserror::Error;

use crate::codec::{put_prefixed, CodecError, CodecErrorKind, Cursor};
use crate::crypto::{PublicKey, Scheme};

/// Position in the roster: 0 is the initiator, 1..=n are guarantors.
pub type PartyId = usize;

pub const INITIATOR: PartyId = 0;
/// Upper bound on guarantors per draw.
pub const MAX_GUARANTORS: usize = 16;
/// Recommended guarantor count (three to five parties in total).
pub const RECOMMENDED_GUARANTORS: std::ops::RangeInclusive<usize> = 2..=4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Initiator,
    Guarantor,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Initiator => "initiator",
            Role::Guarantor => "guarantor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "initiator" => Some(Role::Initiator),
            "guarantor" => Some(Role::Guarantor),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Member {
    pub name: String,
    pub role: Role,
    pub public_key: PublicKey,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RosterError {
    #[error("roster must list exactly one initiator, first")]
    Initiator,
    #[error("roster needs 1..={MAX_GUARANTORS} guarantors, got {0}")]
    GuarantorCount(usize),
    #[error("duplicate participant name {0:?}")]
    DuplicateName(String),
    #[error("participant names must be non-empty printable text without whitespace: {0:?}")]
    BadName(String),
    #[error("participant {0:?} uses a different signature scheme")]
    MixedSchemes(String),
}

/// The fixed, agreed list of participants and their public keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Roster {
    scheme: Scheme,
    members: Vec<Member>,
}

impl Roster {
    pub fn new(members: Vec<Member>) -> Result<Self, RosterError> {
        let Some(first) = members.first() else {
            return Err(RosterError::Initiator);
        };
        if first.role != Role::Initiator
            || members[1..].iter().any(|m| m.role != Role::Guarantor)
        {
            return Err(RosterError::Initiator);
        }
        let guarantors = members.len() - 1;
        if !(1..=MAX_GUARANTORS).contains(&guarantors) {
            return Err(RosterError::GuarantorCount(guarantors));
        }
        let scheme = first.public_key.scheme();
        for (i, m) in members.iter().enumerate() {
            if m.name.is_empty() || m.name.chars().any(|c| c.is_whitespace() || c.is_control()) {
                return Err(RosterError::BadName(m.name.clone()));
            }
            if members[..i].iter().any(|o| o.name == m.name) {
                return Err(RosterError::DuplicateName(m.name.clone()));
            }
            if m.public_key.scheme() != scheme {
                return Err(RosterError::MixedSchemes(m.name.clone()));
            }
        }
        Ok(Self { scheme, members })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn member(&self, id: PartyId) -> Option<&Member> {
        self.members.get(id)
    }

    pub fn name(&self, id: PartyId) -> &str {
        &self.members[id].name
    }

    pub fn guarantor_count(&self) -> usize {
        self.members.len() - 1
    }

    pub fn guarantor_ids(&self) -> std::ops::RangeInclusive<PartyId> {
        1..=self.guarantor_count()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<PartyId> {
        self.members.iter().position(|m| m.name == name)
    }

    /// Canonical bytes: `u32 count`, then per member `role byte`,
    /// length-prefixed name, length-prefixed raw public key.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.members.len() as u32).to_be_bytes());
        for m in &self.members {
            out.push(match m.role {
                Role::Initiator => 0,
                Role::Guarantor => 1,
            });
            put_prefixed(&mut out, m.name.as_bytes());
            put_prefixed(&mut out, &m.public_key.to_bytes());
        }
        out
    }

    pub fn decode(scheme: Scheme, bytes: &[u8], base: usize) -> Result<Self, CodecError> {
        let mut cur = Cursor::with_base(bytes, base);
        let count = cur.u32()? as usize;
        if count > MAX_GUARANTORS + 1 {
            return Err(cur.err(CodecErrorKind::OutOfRange("roster size")));
        }
        let mut members = Vec::with_capacity(count);
        for _ in 0..count {
            let at = cur.offset();
            let role = match cur.u8()? {
                0 => Role::Initiator,
                1 => Role::Guarantor,
                _ => return Err(CodecError::new(at, CodecErrorKind::OutOfRange("role"))),
            };
            let name_at = cur.offset();
            let name = std::str::from_utf8(cur.prefixed()?)
                .map_err(|_| CodecError::new(name_at, CodecErrorKind::InvalidUtf8))?
                .to_owned();
            let key_at = cur.offset();
            let public_key = PublicKey::from_bytes(scheme, cur.prefixed()?)
                .map_err(|_| CodecError::new(key_at, CodecErrorKind::OutOfRange("public key")))?;
            members.push(Member {
                name,
                role,
                public_key,
            });
        }
        cur.finish()?;
        Roster::new(members).map_err(|_| CodecError::new(base, CodecErrorKind::OutOfRange("roster")))
    }
}
