use std::fmt;
use std::path::Path;

use ed25519_dalek::{Signer as _, Verifier as _};
use rand_core::CryptoRngCore;

use super::CryptoError;

/// Magic prefix of a public key file.
pub const PUBLIC_KEY_MAGIC: [u8; 4] = *b"FDPK";
/// Magic prefix of a secret key file.
pub const SECRET_KEY_MAGIC: [u8; 4] = *b"FDSK";

/// Detached signature scheme. The id byte is recorded in key files and
/// transcript headers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Ed25519,
    EcdsaP256,
}

impl Scheme {
    pub fn id(self) -> u8 {
        match self {
            Scheme::Ed25519 => 1,
            Scheme::EcdsaP256 => 2,
        }
    }

    pub fn from_id(id: u8) -> Result<Self, CryptoError> {
        match id {
            1 => Ok(Scheme::Ed25519),
            2 => Ok(Scheme::EcdsaP256),
            other => Err(CryptoError::UnknownScheme(format!("id {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ed25519 => "ed25519",
            Scheme::EcdsaP256 => "ecdsa-p256",
        }
    }

    pub fn parse(name: &str) -> Result<Self, CryptoError> {
        match name {
            "ed25519" => Ok(Scheme::Ed25519),
            "ecdsa-p256" | "p256" => Ok(Scheme::EcdsaP256),
            other => Err(CryptoError::UnknownScheme(other.to_owned())),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A signing key. Signatures are deterministic for both schemes
/// (RFC 8032 and RFC 6979), which keeps seeded simulations reproducible.
#[derive(Clone)]
pub enum KeyPair {
    Ed25519(ed25519_dalek::SigningKey),
    EcdsaP256(p256::ecdsa::SigningKey),
}

impl KeyPair {
    pub fn generate(scheme: Scheme, rng: &mut impl CryptoRngCore) -> Self {
        match scheme {
            Scheme::Ed25519 => KeyPair::Ed25519(ed25519_dalek::SigningKey::generate(rng)),
            Scheme::EcdsaP256 => KeyPair::EcdsaP256(p256::ecdsa::SigningKey::random(rng)),
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            KeyPair::Ed25519(_) => Scheme::Ed25519,
            KeyPair::EcdsaP256(_) => Scheme::EcdsaP256,
        }
    }

    pub fn public_key(&self) -> PublicKey {
        match self {
            KeyPair::Ed25519(k) => PublicKey::Ed25519(k.verifying_key()),
            KeyPair::EcdsaP256(k) => PublicKey::EcdsaP256(*k.verifying_key()),
        }
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        match self {
            KeyPair::Ed25519(k) => k.sign(message).to_bytes().to_vec(),
            KeyPair::EcdsaP256(k) => {
                let sig: p256::ecdsa::Signature = k.sign(message);
                sig.to_bytes().to_vec()
            }
        }
    }

    pub fn secret_bytes(&self) -> Vec<u8> {
        match self {
            KeyPair::Ed25519(k) => k.to_bytes().to_vec(),
            KeyPair::EcdsaP256(k) => k.to_bytes().to_vec(),
        }
    }

    pub fn from_secret_bytes(scheme: Scheme, bytes: &[u8]) -> Result<Self, CryptoError> {
        let malformed = |reason: &str| CryptoError::Malformed {
            what: "secret key",
            reason: reason.to_owned(),
        };
        match scheme {
            Scheme::Ed25519 => {
                let raw: [u8; 32] = bytes.try_into().map_err(|_| malformed("expected 32 bytes"))?;
                Ok(KeyPair::Ed25519(ed25519_dalek::SigningKey::from_bytes(&raw)))
            }
            Scheme::EcdsaP256 => p256::ecdsa::SigningKey::from_slice(bytes)
                .map(KeyPair::EcdsaP256)
                .map_err(|e| malformed(&e.to_string())),
        }
    }

    pub fn to_file_bytes(&self) -> Vec<u8> {
        key_file(SECRET_KEY_MAGIC, self.scheme(), &self.secret_bytes())
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let (scheme, raw) = parse_key_file(SECRET_KEY_MAGIC, bytes)?;
        Self::from_secret_bytes(scheme, raw)
    }

    pub fn read_file(path: &Path) -> Result<Self, CryptoError> {
        Self::from_file_bytes(&std::fs::read(path)?)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair({}, {:?})", self.scheme(), self.public_key())
    }
}

#[derive(Clone, PartialEq, Eq)]
pub enum PublicKey {
    Ed25519(ed25519_dalek::VerifyingKey),
    EcdsaP256(p256::ecdsa::VerifyingKey),
}

impl PublicKey {
    pub fn scheme(&self) -> Scheme {
        match self {
            PublicKey::Ed25519(_) => Scheme::Ed25519,
            PublicKey::EcdsaP256(_) => Scheme::EcdsaP256,
        }
    }

    /// Raw key bytes: 32 bytes for Ed25519, 33-byte compressed SEC1 for P-256.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            PublicKey::Ed25519(k) => k.to_bytes().to_vec(),
            PublicKey::EcdsaP256(k) => k.to_encoded_point(true).as_bytes().to_vec(),
        }
    }

    pub fn from_bytes(scheme: Scheme, bytes: &[u8]) -> Result<Self, CryptoError> {
        let malformed = |reason: String| CryptoError::Malformed {
            what: "public key",
            reason,
        };
        match scheme {
            Scheme::Ed25519 => {
                let raw: [u8; 32] = bytes
                    .try_into()
                    .map_err(|_| malformed("expected 32 bytes".into()))?;
                ed25519_dalek::VerifyingKey::from_bytes(&raw)
                    .map(PublicKey::Ed25519)
                    .map_err(|e| malformed(e.to_string()))
            }
            Scheme::EcdsaP256 => p256::ecdsa::VerifyingKey::from_sec1_bytes(bytes)
                .map(PublicKey::EcdsaP256)
                .map_err(|e| malformed(e.to_string())),
        }
    }

    /// `Ok(false)` for a well-formed signature that does not verify; `Err` for
    /// signature bytes that cannot be a signature of this scheme at all.
    pub fn verify(&self, message: &[u8], signature: &[u8]) -> Result<bool, CryptoError> {
        match self {
            PublicKey::Ed25519(k) => {
                let sig = ed25519_dalek::Signature::from_slice(signature).map_err(|e| {
                    CryptoError::Malformed {
                        what: "signature",
                        reason: e.to_string(),
                    }
                })?;
                Ok(k.verify_strict(message, &sig).is_ok())
            }
            PublicKey::EcdsaP256(k) => {
                let sig = p256::ecdsa::Signature::from_slice(signature).map_err(|e| {
                    CryptoError::Malformed {
                        what: "signature",
                        reason: e.to_string(),
                    }
                })?;
                Ok(k.verify(message, &sig).is_ok())
            }
        }
    }

    pub fn to_file_bytes(&self) -> Vec<u8> {
        key_file(PUBLIC_KEY_MAGIC, self.scheme(), &self.to_bytes())
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let (scheme, raw) = parse_key_file(PUBLIC_KEY_MAGIC, bytes)?;
        Self::from_bytes(scheme, raw)
    }

    pub fn read_file(path: &Path) -> Result<Self, CryptoError> {
        Self::from_file_bytes(&std::fs::read(path)?)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}:{})", self.scheme(), hex::encode(self.to_bytes()))
    }
}

fn key_file(magic: [u8; 4], scheme: Scheme, raw: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + raw.len());
    out.extend_from_slice(&magic);
    out.push(scheme.id());
    out.extend_from_slice(raw);
    out
}

fn parse_key_file(magic: [u8; 4], bytes: &[u8]) -> Result<(Scheme, &[u8]), CryptoError> {
    if bytes.len() < 5 || bytes[..4] != magic {
        return Err(CryptoError::KeyFile(format!(
            "missing {} magic",
            String::from_utf8_lossy(&magic)
        )));
    }
    Ok((Scheme::from_id(bytes[4])?, &bytes[5..]))
}
