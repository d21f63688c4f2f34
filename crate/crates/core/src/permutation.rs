//! Permutations of `[0, k)` in one-line form, and XOR maps on t-bit strings.
//!
//! A uniformly random permutation applied to any fixed input yields a uniform
//! output, whatever the input distribution. The protocol combines the
//! initiator's number with every guarantor's permutation on that basis.

use thiserror::Error;

use crate::crypto::{CryptoError, EntropySource};

/// Largest domain the protocol accepts. A guarantor materializes a permutation
/// of the whole domain, so `k` has to stay within memory reach.
pub const MAX_DOMAIN: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermutationError {
    #[error("domain must be non-empty")]
    EmptyDomain,
    #[error("domain size {0} exceeds the supported maximum")]
    DomainTooLarge(u64),
    #[error("entry {value} at position {index} is out of range for k={k}")]
    OutOfRange { index: usize, value: u64, k: u64 },
    #[error("value {value} appears more than once")]
    Duplicate { value: u64 },
    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: u64, right: u64 },
    #[error("input {input} is outside [0, {k})")]
    InputOutOfRange { input: u64, k: u64 },
    #[error("bit width {0} is not in 1..=20")]
    BadWidth(u32),
}

/// A bijection on `[0, k)`; entry `i` is the image of `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    mapping: Vec<u64>,
}

impl Permutation {
    pub fn identity(k: u64) -> Result<Self, PermutationError> {
        check_domain(k)?;
        Ok(Self {
            mapping: (0..k).collect(),
        })
    }

    /// Rotation `x ↦ (x + shift) mod k`.
    pub fn rotation(k: u64, shift: u64) -> Result<Self, PermutationError> {
        check_domain(k)?;
        Ok(Self {
            mapping: (0..k).map(|x| (x + shift % k) % k).collect(),
        })
    }

    pub fn from_mapping(mapping: Vec<u64>) -> Result<Self, PermutationError> {
        let k = mapping.len() as u64;
        check_domain(k)?;
        let mut seen = vec![false; mapping.len()];
        for (index, &value) in mapping.iter().enumerate() {
            if value >= k {
                return Err(PermutationError::OutOfRange { index, value, k });
            }
            if std::mem::replace(&mut seen[value as usize], true) {
                return Err(PermutationError::Duplicate { value });
            }
        }
        Ok(Self { mapping })
    }

    /// Uniform over all `k!` permutations: Fisher–Yates driven by the
    /// rejection-sampled `next_below`.
    pub fn random(k: u64, src: &mut EntropySource) -> Result<Self, PermutationError> {
        let mut p = Self::identity(k)?;
        for i in (1..p.mapping.len()).rev() {
            let j = src
                .next_below(i as u64 + 1)
                .map_err(|_: CryptoError| PermutationError::EmptyDomain)?;
            p.mapping.swap(i, j as usize);
        }
        Ok(p)
    }

    pub fn k(&self) -> u64 {
        self.mapping.len() as u64
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.mapping
    }

    pub fn apply(&self, a: u64) -> Result<u64, PermutationError> {
        self.mapping
            .get(usize::try_from(a).unwrap_or(usize::MAX))
            .copied()
            .ok_or(PermutationError::InputOutOfRange { input: a, k: self.k() })
    }

    /// `self ∘ inner`, i.e. `x ↦ self(inner(x))`.
    pub fn compose(&self, inner: &Permutation) -> Result<Permutation, PermutationError> {
        if self.k() != inner.k() {
            return Err(PermutationError::SizeMismatch {
                left: self.k(),
                right: inner.k(),
            });
        }
        Ok(Permutation {
            mapping: inner
                .mapping
                .iter()
                .map(|&x| self.mapping[x as usize])
                .collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u64; self.mapping.len()];
        for (i, &v) in self.mapping.iter().enumerate() {
            inv[v as usize] = i as u64;
        }
        Permutation { mapping: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &v)| i as u64 == v)
    }

    /// Exchanges the images of `a` and `b`.
    pub fn swap_images(&mut self, a: u64, b: u64) -> Result<(), PermutationError> {
        let k = self.k();
        for x in [a, b] {
            if x >= k {
                return Err(PermutationError::InputOutOfRange { input: x, k });
            }
        }
        self.mapping.swap(a as usize, b as usize);
        Ok(())
    }
}

fn check_domain(k: u64) -> Result<(), PermutationError> {
    if k == 0 {
        Err(PermutationError::EmptyDomain)
    } else if k > MAX_DOMAIN {
        Err(PermutationError::DomainTooLarge(k))
    } else {
        Ok(())
    }
}

/// `φ₁ ∘ φ₂ ∘ … ∘ φₙ` for permutations listed in order `φ₁, …, φₙ`.
pub fn compose_all(perms: &[Permutation]) -> Result<Option<Permutation>, PermutationError> {
    let mut iter = perms.iter();
    let Some(first) = iter.next() else {
        return Ok(None);
    };
    let mut acc = first.clone();
    for p in iter {
        acc = acc.compose(p)?;
    }
    Ok(Some(acc))
}

/// `φ₁(φ₂(…φₙ(a)…))` without materializing the composition.
pub fn apply_chain(perms: &[Permutation], a: u64) -> Result<u64, PermutationError> {
    perms.iter().rev().try_fold(a, |x, p| p.apply(x))
}

/// `τ_b : a ↦ a ⊕ b` on t-bit strings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XorMap {
    b: u64,
    bits: u32,
}

impl XorMap {
    /// Widths up to 20 bits keep the derived permutation within `MAX_DOMAIN`.
    pub fn new(b: u64, bits: u32) -> Result<Self, PermutationError> {
        if !(1..=20).contains(&bits) {
            return Err(PermutationError::BadWidth(bits));
        }
        let k = 1u64 << bits;
        if b >= k {
            return Err(PermutationError::InputOutOfRange { input: b, k });
        }
        Ok(Self { b, bits })
    }

    pub fn domain(&self) -> u64 {
        1 << self.bits
    }

    pub fn apply(&self, a: u64) -> Result<u64, PermutationError> {
        if a >= self.domain() {
            return Err(PermutationError::InputOutOfRange {
                input: a,
                k: self.domain(),
            });
        }
        Ok(a ^ self.b)
    }

    pub fn as_permutation(&self) -> Permutation {
        Permutation {
            mapping: (0..self.domain()).map(|a| a ^ self.b).collect(),
        }
    }
}
