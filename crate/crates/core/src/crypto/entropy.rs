use rand_chacha::rand_core::{CryptoRng, Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_core::OsRng;

use super::{sha3_256, CryptoError};

#[allow(clippy::large_enum_variant)]
enum RawSource {
    /// Stand-in for a hardware generator, replayable from its seed.
    Seeded(ChaCha20Rng),
    System,
}

/// Random bits for secrets, salts and keys.
///
/// Output is the raw source XORed with an independent ChaCha20 keystream, so
/// a biased raw source is still whitened. In seeded mode both streams are
/// derived from the seed and the whole output is a pure function of it.
pub struct EntropySource {
    raw: RawSource,
    mixer: ChaCha20Rng,
}

impl std::fmt::Debug for EntropySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mode = if self.is_seeded() { "seeded" } else { "system" };
        f.debug_struct("EntropySource").field("mode", &mode).finish_non_exhaustive()
    }
}

impl EntropySource {
    pub fn seeded(seed: [u8; 32]) -> Self {
        let mut mixer_seed = b"fairdraw/entropy/mixer".to_vec();
        mixer_seed.extend_from_slice(&seed);
        Self {
            raw: RawSource::Seeded(ChaCha20Rng::from_seed(seed)),
            mixer: ChaCha20Rng::from_seed(sha3_256(&mixer_seed)),
        }
    }

    pub fn system() -> Self {
        Self {
            raw: RawSource::System,
            mixer: ChaCha20Rng::from_rng(OsRng).expect("operating system RNG unavailable"),
        }
    }

    /// Derives a 32-byte seed from a parent seed and a list of labels. Each
    /// label is length-prefixed so distinct label lists never collide.
    pub fn derive_seed(parent: &[u8; 32], labels: &[&[u8]]) -> [u8; 32] {
        let mut buf = b"fairdraw/entropy/derive".to_vec();
        buf.extend_from_slice(parent);
        for label in labels {
            buf.extend_from_slice(&(label.len() as u64).to_be_bytes());
            buf.extend_from_slice(label);
        }
        sha3_256(&buf)
    }

    pub fn is_seeded(&self) -> bool {
        matches!(self.raw, RawSource::Seeded(_))
    }

    pub fn fill(&mut self, dest: &mut [u8]) {
        match &mut self.raw {
            RawSource::Seeded(rng) => rng.fill_bytes(dest),
            RawSource::System => OsRng.fill_bytes(dest),
        }
        let mut mask = [0u8; 64];
        for chunk in dest.chunks_mut(64) {
            let mask = &mut mask[..chunk.len()];
            self.mixer.fill_bytes(mask);
            for (d, m) in chunk.iter_mut().zip(mask.iter()) {
                *d ^= m;
            }
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut b = [0u8; 8];
        self.fill(&mut b);
        u64::from_be_bytes(b)
    }

    /// Uniform integer in `[0, k)` by rejection sampling on 64-bit draws.
    ///
    /// Draws at or above the largest multiple of `k` that fits in 2^64 are
    /// discarded, so every residue has exactly the same number of preimages.
    pub fn next_below(&mut self, k: u64) -> Result<u64, CryptoError> {
        if k == 0 {
            return Err(CryptoError::ZeroBound);
        }
        let span = 1u128 << 64;
        let limit = span - span % u128::from(k);
        loop {
            let x = u128::from(self.next_u64());
            if x < limit {
                return Ok((x % u128::from(k)) as u64);
            }
        }
    }
}

impl RngCore for EntropySource {
    fn next_u32(&mut self) -> u32 {
        let mut b = [0u8; 4];
        self.fill(&mut b);
        u32::from_be_bytes(b)
    }

    fn next_u64(&mut self) -> u64 {
        EntropySource::next_u64(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.fill(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.fill(dest);
        Ok(())
    }
}

impl CryptoRng for EntropySource {}
