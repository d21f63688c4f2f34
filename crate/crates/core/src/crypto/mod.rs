//! Salted hash commitments, detached signatures and the mixed entropy source.

mod entropy;
mod sign;

use std::fmt;

use sha3::{Digest, Sha3_256};
use thiserror::Error;

pub use entropy::EntropySource;
pub use sign::{KeyPair, PublicKey, Scheme, PUBLIC_KEY_MAGIC, SECRET_KEY_MAGIC};

/// Salt length in bytes (512 bits).
pub const SALT_LEN: usize = 64;
/// Commitment digest length in bytes (SHA3-256).
pub const HASH_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum CryptoError {
    #[error("upper bound must be at least 1")]
    ZeroBound,
    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },
    #[error("unknown signature scheme {0}")]
    UnknownScheme(String),
    #[error("key file: {0}")]
    KeyFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 512 random bits mixed into every commitment preimage.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Salt([u8; SALT_LEN]);

impl Salt {
    pub fn from_bytes(bytes: [u8; SALT_LEN]) -> Self {
        Self(bytes)
    }

    pub fn generate(src: &mut EntropySource) -> Self {
        let mut bytes = [0u8; SALT_LEN];
        src.fill(&mut bytes);
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SALT_LEN] {
        &self.0
    }
}

impl fmt::Debug for Salt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Salt({}…)", hex::encode(&self.0[..8]))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CommitmentHash([u8; HASH_LEN]);

impl CommitmentHash {
    pub fn from_bytes(bytes: [u8; HASH_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; HASH_LEN] {
        &self.0
    }
}

impl fmt::Debug for CommitmentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CommitmentHash({})", hex::encode(self.0))
    }
}

impl fmt::Display for CommitmentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

pub fn sha3_256(data: &[u8]) -> [u8; HASH_LEN] {
    Sha3_256::digest(data).into()
}

/// SHA3-256 over `salt ∥ secret`.
pub fn commit(secret: &[u8], salt: &Salt) -> CommitmentHash {
    let mut h = Sha3_256::new();
    h.update(salt.as_bytes());
    h.update(secret);
    CommitmentHash(h.finalize().into())
}

/// Full 32-byte comparison of the recomputed commitment against `hash`.
pub fn verify_commitment(hash: &CommitmentHash, secret: &[u8], salt: &Salt) -> bool {
    commit(secret, salt) == *hash
}
