//! Jointly generated, verifiable random integers in `[0, k)`.
//!
//! One initiator contributes a number, every guarantor contributes a
//! permutation, and all contributions are committed with salted SHA3-256
//! hashes before any is revealed. The result is uniform as long as a single
//! participant draws honestly.

pub mod codec;
pub mod crypto;
pub mod permutation;
pub mod protocol;
pub mod register;
pub mod simnet;
pub mod stats;
