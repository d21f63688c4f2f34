#![allow(dead_code)]

use fairdraw::crypto::{EntropySource, KeyPair, Scheme};
use fairdraw::protocol::Role;
use fairdraw::simnet::{PartySpec, SimSchedule, Strategy};

pub fn seed(n: u64) -> [u8; 32] {
    let mut s = [0u8; 32];
    s[24..].copy_from_slice(&n.to_be_bytes());
    s
}

pub fn key(scheme: Scheme, name: &str) -> KeyPair {
    let seed = EntropySource::derive_seed(&seed(0xfeed), &[name.as_bytes()]);
    KeyPair::generate(scheme, &mut EntropySource::seeded(seed))
}

/// Initiator `i` followed by guarantors `g1..`, one strategy each.
pub fn parties_with(scheme: Scheme, strategies: &[Strategy]) -> Vec<PartySpec> {
    strategies
        .iter()
        .enumerate()
        .map(|(i, &strategy)| {
            let (name, role) = if i == 0 {
                ("i".to_owned(), Role::Initiator)
            } else {
                (format!("g{i}"), Role::Guarantor)
            };
            PartySpec {
                key: key(scheme, &name),
                name,
                role,
                strategy,
            }
        })
        .collect()
}

pub fn parties(strategies: &[Strategy]) -> Vec<PartySpec> {
    parties_with(Scheme::Ed25519, strategies)
}

pub fn honest(n: usize) -> Vec<PartySpec> {
    parties(&vec![Strategy::Honest; n])
}

pub fn schedule(n: u64) -> SimSchedule {
    SimSchedule::new(seed(n))
}
