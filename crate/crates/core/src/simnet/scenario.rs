//! Declarative scenario files.
//!
//! One directive per line; `#` starts a comment.
//!
//! ```text
//! seed 0x00ff...            # hex (up to 32 bytes) or a decimal integer
//! k 10
//! trials 60000
//! draws 2
//! timeout 30000
//! latency uniform 5 20      # or: latency fixed 10
//! scheme ed25519
//! initiator alice honest
//! guarantor bob constant 0
//! guarantor carol adaptive-reveal 1
//! fault at-step 12 tamper 40 to bob
//! fault at-step 1 replay 1 announce alice to carol
//! ```
//!
//! Strategies: `honest`, `constant V`, `renege`, `adaptive-reveal TARGET`,
//! `waits-but-complies`, `replayer KIND`, `staller STEP`. Fault actions:
//! `drop`, `duplicate`, `delay MS`, `replay DRAW KIND SENDER`, `tamper INDEX`.
//! Keys are derived from the seed and the party name, so a scenario file
//! fully determines a run.

use thiserror::Error;

use crate::codec::StructureTag;
use crate::crypto::{EntropySource, KeyPair, Scheme};
use crate::protocol::{PartyId, Role};

use super::{
    Fault, FaultAction, FaultTrigger, Latency, PartySpec, ReplayRef, SimSchedule, Strategy,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("scenario has no {0}")]
    Missing(&'static str),
    #[error("scenario names party {0} more than once")]
    DuplicateParty(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioParty {
    pub name: String,
    pub role: Role,
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub seed: [u8; 32],
    pub k: u64,
    pub trials: Option<u64>,
    pub draws: u64,
    pub timeout_ms: u64,
    pub latency: Latency,
    pub scheme: Scheme,
    pub parties: Vec<ScenarioParty>,
    pub faults: Vec<Fault>,
}

/// Parses a seed given as `0x`-prefixed or bare hex of up to 32 bytes
/// (left-padded with zeros), or as a decimal integer (big-endian in the last
/// eight bytes).
pub fn parse_seed(text: &str) -> Option<[u8; 32]> {
    let text = text.trim();
    let mut seed = [0u8; 32];
    if let Ok(v) = text.parse::<u64>() {
        seed[24..].copy_from_slice(&v.to_be_bytes());
        return Some(seed);
    }
    let digits = text.strip_prefix("0x").unwrap_or(text);
    let padded = if digits.len() % 2 == 1 {
        format!("0{digits}")
    } else {
        digits.to_owned()
    };
    let bytes = hex::decode(padded).ok()?;
    if bytes.is_empty() || bytes.len() > 32 {
        return None;
    }
    seed[32 - bytes.len()..].copy_from_slice(&bytes);
    Some(seed)
}

struct Line<'a> {
    no: usize,
    words: std::slice::Iter<'a, &'a str>,
}

impl<'a> Line<'a> {
    fn err(&self, reason: impl Into<String>) -> ScenarioError {
        ScenarioError::Syntax {
            line: self.no,
            reason: reason.into(),
        }
    }

    fn word(&mut self, what: &str) -> Result<&'a str, ScenarioError> {
        self.words
            .next()
            .copied()
            .ok_or_else(|| self.err(format!("missing {what}")))
    }

    fn number(&mut self, what: &str) -> Result<u64, ScenarioError> {
        let w = self.word(what)?;
        w.parse().map_err(|_| self.err(format!("{what} `{w}` is not a number")))
    }

    fn kind(&mut self) -> Result<StructureTag, ScenarioError> {
        let w = self.word("structure kind")?;
        StructureTag::from_name(w).ok_or_else(|| self.err(format!("unknown structure kind `{w}`")))
    }

    fn end(&mut self) -> Result<(), ScenarioError> {
        match self.words.next() {
            Some(extra) => Err(self.err(format!("unexpected `{extra}`"))),
            None => Ok(()),
        }
    }
}

struct PendingFault {
    line: usize,
    trigger: FaultTrigger,
    action: PendingAction,
    to: Option<String>,
}

enum PendingAction {
    Ready(FaultAction),
    Replay {
        draw_no: u64,
        kind: StructureTag,
        from: String,
    },
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut seed = None;
        let mut k = None;
        let mut trials = None;
        let mut draws = 1;
        let mut timeout_ms = crate::protocol::DEFAULT_TIMEOUT_MS;
        let mut latency = Latency::default();
        let mut scheme = Scheme::Ed25519;
        let mut parties: Vec<ScenarioParty> = Vec::new();
        let mut pending = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("");
            let words: Vec<&str> = content.split_whitespace().collect();
            if words.is_empty() {
                continue;
            }
            let mut line = Line {
                no: i + 1,
                words: words.iter(),
            };
            let directive = line.word("directive")?;
            match directive {
                "seed" => {
                    let w = line.word("seed")?;
                    seed = Some(parse_seed(w).ok_or_else(|| line.err("malformed seed"))?);
                }
                "k" => k = Some(line.number("k")?),
                "trials" => trials = Some(line.number("trials")?),
                "draws" => draws = line.number("draws")?,
                "timeout" => timeout_ms = line.number("timeout")?,
                "latency" => {
                    latency = match line.word("latency model")? {
                        "fixed" => Latency::Fixed(line.number("latency")?),
                        "uniform" => {
                            let min = line.number("minimum latency")?;
                            let max = line.number("maximum latency")?;
                            if min > max {
                                return Err(line.err("minimum latency exceeds maximum"));
                            }
                            Latency::Uniform { min, max }
                        }
                        other => return Err(line.err(format!("unknown latency model `{other}`"))),
                    }
                }
                "scheme" => {
                    let w = line.word("scheme")?;
                    scheme = Scheme::parse(w).map_err(|e| line.err(e.to_string()))?;
                }
                "initiator" | "guarantor" => {
                    let role = Role::parse(directive).expect("matched role name");
                    let name = line.word("party name")?.to_owned();
                    if parties.iter().any(|p| p.name == name) {
                        return Err(ScenarioError::DuplicateParty(name));
                    }
                    let strategy = match line.words.len() {
                        0 => Strategy::Honest,
                        _ => parse_strategy(&mut line)?,
                    };
                    if !strategy.allowed_for(role) {
                        return Err(line.err(format!("{strategy} cannot be used by the {}", role.name())));
                    }
                    parties.push(ScenarioParty {
                        name,
                        role,
                        strategy,
                    });
                }
                "fault" => pending.push(parse_fault(&mut line)?),
                other => return Err(line.err(format!("unknown directive `{other}`"))),
            }
            line.end()?;
        }

        let resolve = |name: &str, line: usize| -> Result<PartyId, ScenarioError> {
            parties
                .iter()
                .position(|p| p.name == name)
                .ok_or_else(|| ScenarioError::Syntax {
                    line,
                    reason: format!("unknown party `{name}`"),
                })
        };
        let mut faults = Vec::with_capacity(pending.len());
        for p in pending {
            let action = match p.action {
                PendingAction::Ready(a) => a,
                PendingAction::Replay {
                    draw_no,
                    kind,
                    from,
                } => FaultAction::Replay(ReplayRef {
                    draw_no,
                    kind,
                    from: resolve(&from, p.line)?,
                }),
            };
            let mut fault = Fault::new(p.trigger, action);
            if let Some(to) = &p.to {
                fault = fault.to(resolve(to, p.line)?);
            }
            faults.push(fault);
        }

        Ok(Self {
            seed: seed.ok_or(ScenarioError::Missing("seed"))?,
            k: k.ok_or(ScenarioError::Missing("k"))?,
            trials,
            draws,
            timeout_ms,
            latency,
            scheme,
            parties,
            faults,
        })
    }

    /// The key a party uses, derived from the scenario seed and its name.
    pub fn key_for(&self, name: &str) -> KeyPair {
        let seed = EntropySource::derive_seed(&self.seed, &[b"key", name.as_bytes()]);
        KeyPair::generate(self.scheme, &mut EntropySource::seeded(seed))
    }

    pub fn party_specs(&self) -> Vec<PartySpec> {
        self.parties
            .iter()
            .map(|p| PartySpec {
                name: p.name.clone(),
                role: p.role,
                strategy: p.strategy,
                key: self.key_for(&p.name),
            })
            .collect()
    }

    /// Schedule for the draw with the given 1-based index, with a seed
    /// derived per draw.
    pub fn schedule(&self, draw_index: u64) -> SimSchedule {
        let seed = EntropySource::derive_seed(&self.seed, &[b"draw", &draw_index.to_be_bytes()]);
        SimSchedule {
            seed,
            latency: self.latency,
            timeout_ms: self.timeout_ms,
            horizon_ms: 100 * self.timeout_ms,
            faults: self.faults.clone(),
        }
    }
}

fn parse_strategy(line: &mut Line<'_>) -> Result<Strategy, ScenarioError> {
    Ok(match line.word("strategy")? {
        "honest" => Strategy::Honest,
        "constant" => Strategy::Constant(line.number("constant")?),
        "renege" => Strategy::Renege,
        "adaptive-reveal" => Strategy::AdaptiveReveal {
            target: line.number("target")?,
        },
        "waits-but-complies" => Strategy::WaitsButComplies,
        "replayer" => Strategy::Replayer { kind: line.kind()? },
        "staller" => {
            let step = line.number("stop step")?;
            let stop_at_step = u8::try_from(step)
                .ok()
                .filter(|s| (1..=15).contains(s))
                .ok_or_else(|| line.err("stop step must be between 1 and 15"))?;
            Strategy::Staller { stop_at_step }
        }
        other => return Err(line.err(format!("unknown strategy `{other}`"))),
    })
}

fn parse_fault(line: &mut Line<'_>) -> Result<PendingFault, ScenarioError> {
    let trigger = match line.word("trigger")? {
        "at-time" => FaultTrigger::AtTime(line.number("time")?),
        "at-step" => {
            let step = line.number("step")?;
            FaultTrigger::AtStep(u8::try_from(step).map_err(|_| line.err("step out of range"))?)
        }
        other => return Err(line.err(format!("unknown trigger `{other}`"))),
    };
    let action = match line.word("fault action")? {
        "drop" => PendingAction::Ready(FaultAction::Drop),
        "duplicate" => PendingAction::Ready(FaultAction::Duplicate),
        "delay" => PendingAction::Ready(FaultAction::Delay(line.number("delay")?)),
        "tamper" => {
            let idx = line.number("byte index")?;
            PendingAction::Ready(FaultAction::Tamper(
                usize::try_from(idx).map_err(|_| line.err("byte index out of range"))?,
            ))
        }
        "replay" => PendingAction::Replay {
            draw_no: line.number("draw number")?,
            kind: line.kind()?,
            from: line.word("sender")?.to_owned(),
        },
        other => return Err(line.err(format!("unknown fault action `{other}`"))),
    };
    let to = match line.words.next() {
        Some(&"to") => Some(line.word("recipient")?.to_owned()),
        Some(extra) => return Err(line.err(format!("unexpected `{extra}`"))),
        None => None,
    };
    Ok(PendingFault {
        line: line.no,
        trigger,
        action,
        to,
    })
}
