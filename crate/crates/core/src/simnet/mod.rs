//! Deterministic in-process network for running draws.
//!
//! Participants exchange canonical bytes over simulated links driven by a
//! virtual clock. A [`SimSchedule`] fixes link latency, wait-state timeouts
//! and a fault script applied to bytes in flight; adversarial behaviour is
//! attached per participant through a [`Strategy`]. Given the same seed,
//! schedule and participants, a run is reproducible bit for bit.

mod engine;
mod experiment;
mod scenario;

use std::fmt;

use thiserror::Error;

use crate::codec::StructureTag;
use crate::crypto::{KeyPair, Salt};
use crate::protocol::{Abort, Outcome, PartyId, ProtocolError, Role, RosterError};
use crate::register::{DrawTranscript, RegisterError};

pub use engine::{run_draw, Simulation};
pub use experiment::{coalition_bias_experiment, ExperimentReport};
pub use scenario::{parse_seed, Scenario, ScenarioError, ScenarioParty};

/// Default one-way link latency in simulated milliseconds.
pub const DEFAULT_LATENCY_MS: u64 = 10;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Roster(#[from] RosterError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error("strategy {strategy} cannot be used by the {role}")]
    StrategyRole { strategy: Strategy, role: &'static str },
    #[error("expected {expected} registers, one per party, got {got}")]
    RegisterCount { expected: usize, got: usize },
    #[error("fault script references party {0}, which is not in the roster")]
    UnknownParty(PartyId),
    #[error("no recorded {kind} from party {from} in draw {draw_no} to replay")]
    ReplayNotFound {
        draw_no: u64,
        kind: StructureTag,
        from: PartyId,
    },
    #[error("{sender} sent a signature attributed to {victim} that {victim} never produced")]
    Forgery { sender: String, victim: String },
    #[error("honest participants disagree on the result: {0:?}")]
    Disagreement(Vec<u64>),
}

/// Per-link one-way delay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Latency {
    Fixed(u64),
    /// Uniform over `min..=max`, drawn from the schedule seed.
    Uniform { min: u64, max: u64 },
}

impl Default for Latency {
    fn default() -> Self {
        Latency::Fixed(DEFAULT_LATENCY_MS)
    }
}

/// Which transmission a fault applies to. Each fault fires once, on the
/// first matching transmission.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultTrigger {
    /// First transmission sent at or after this simulated time.
    AtTime(u64),
    /// First transmission of a structure produced at this protocol step.
    AtStep(u8),
}

/// A recorded message of an earlier draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplayRef {
    pub draw_no: u64,
    pub kind: StructureTag,
    pub from: PartyId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultAction {
    Drop,
    Duplicate,
    /// Extra delay on top of the link latency; delayed messages may overtake
    /// later ones.
    Delay(u64),
    /// Delivers the referenced old message right after the triggering one.
    Replay(ReplayRef),
    /// XORs `0xFF` into the byte at this index (modulo the message length).
    Tamper(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fault {
    pub trigger: FaultTrigger,
    /// Restricts the fault to transmissions towards this party.
    pub to: Option<PartyId>,
    pub action: FaultAction,
}

impl Fault {
    pub fn new(trigger: FaultTrigger, action: FaultAction) -> Self {
        Self {
            trigger,
            to: None,
            action,
        }
    }

    pub fn to(mut self, party: PartyId) -> Self {
        self.to = Some(party);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimSchedule {
    pub seed: [u8; 32],
    pub latency: Latency,
    /// Wait-state timeout in simulated milliseconds.
    pub timeout_ms: u64,
    /// Simulated time after which every unfinished party is stopped.
    pub horizon_ms: u64,
    pub faults: Vec<Fault>,
}

impl SimSchedule {
    pub fn new(seed: [u8; 32]) -> Self {
        Self {
            seed,
            latency: Latency::default(),
            timeout_ms: crate::protocol::DEFAULT_TIMEOUT_MS,
            horizon_ms: 100 * crate::protocol::DEFAULT_TIMEOUT_MS,
            faults: Vec::new(),
        }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.faults.push(fault);
        self
    }
}

/// How a participant behaves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strategy {
    #[default]
    Honest,
    /// Initiator: always contributes `v mod k`. Guarantor: always the
    /// rotation by `v` (identity for 0).
    Constant(u64),
    /// Reveals a value other than the committed one.
    Renege,
    /// Guarantor that waits for every other reveal, then tries to swap in a
    /// permutation forcing `target`.
    AdaptiveReveal { target: u64 },
    /// Guarantor that waits for every honest reveal before revealing its
    /// committed permutation.
    WaitsButComplies,
    /// Re-sends the latest recorded message of `kind` from an earlier draw to
    /// every other participant when the draw starts.
    Replayer { kind: StructureTag },
    /// Goes silent from `stop_at_step` on.
    Staller { stop_at_step: u8 },
}

impl Strategy {
    pub fn is_honest(&self) -> bool {
        matches!(self, Strategy::Honest)
    }

    pub(crate) fn allowed_for(&self, role: Role) -> bool {
        match self {
            Strategy::AdaptiveReveal { .. } | Strategy::WaitsButComplies => {
                role == Role::Guarantor
            }
            _ => true,
        }
    }

    /// Holds its reveal until others have revealed.
    pub(crate) fn waits_for_reveals(&self) -> bool {
        matches!(
            self,
            Strategy::AdaptiveReveal { .. } | Strategy::WaitsButComplies
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Honest => f.write_str("honest"),
            Strategy::Constant(v) => write!(f, "constant {v}"),
            Strategy::Renege => f.write_str("renege"),
            Strategy::AdaptiveReveal { target } => write!(f, "adaptive-reveal {target}"),
            Strategy::WaitsButComplies => f.write_str("waits-but-complies"),
            Strategy::Replayer { kind } => write!(f, "replayer {kind}"),
            Strategy::Staller { stop_at_step } => write!(f, "staller {stop_at_step}"),
        }
    }
}

/// One participant of a simulation.
#[derive(Clone, Debug)]
pub struct PartySpec {
    pub name: String,
    pub role: Role,
    pub strategy: Strategy,
    pub key: KeyPair,
}

/// One transmission on the simulated wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub sent_at: u64,
    pub from: PartyId,
    pub to: PartyId,
    /// `None` when the bytes do not start with a known structure tag.
    pub kind: Option<StructureTag>,
    pub bytes: Vec<u8>,
    /// Fault applied in flight, if any.
    pub fault: Option<FaultAction>,
    /// True for messages injected by the fault script rather than sent by a
    /// participant.
    pub injected: bool,
}

impl TraceEntry {
    pub fn step(&self) -> u8 {
        self.kind.map_or(0, crate::protocol::step_of)
    }
}

/// A participant's hidden contribution, exposed after the run so tests can
/// scan the wire for it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretRecord {
    pub salt: Salt,
    /// Canonical bytes hashed after the salt.
    pub secret_bytes: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct PartyReport {
    pub name: String,
    pub role: Role,
    pub strategy: Strategy,
    pub outcome: Outcome,
    pub transcript: DrawTranscript,
    pub secret: Option<SecretRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed(u64),
    Aborted(Abort),
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub draw_no: u64,
    pub status: RunStatus,
    pub parties: Vec<PartyReport>,
    pub trace: Vec<TraceEntry>,
    pub duration_ms: u64,
}

impl RunOutcome {
    pub fn result(&self) -> Option<u64> {
        match self.status {
            RunStatus::Completed(r) => Some(r),
            RunStatus::Aborted(_) => None,
        }
    }

    pub fn abort(&self) -> Option<&Abort> {
        match &self.status {
            RunStatus::Completed(_) => None,
            RunStatus::Aborted(a) => Some(a),
        }
    }

    pub fn honest(&self) -> impl Iterator<Item = &PartyReport> {
        self.parties.iter().filter(|p| p.strategy.is_honest())
    }

    /// Whether every honest participant holds byte-identical transcript
    /// structures.
    pub fn honest_transcripts_agree(&self) -> bool {
        let mut it = self.honest().map(|p| &p.transcript.structures);
        match it.next() {
            Some(first) => it.all(|t| t == first),
            None => true,
        }
    }
}

/// Which threat each canned scenario exercises. Printed by the test suite.
pub const THREAT_COVERAGE: &[(&str, &str)] = &[
    ("renege guarantor reveals another permutation", "renege on a committed value"),
    ("renege initiator reveals another number", "renege on a committed value"),
    ("adaptive-reveal guarantor forces each target", "renege on a committed value"),
    ("crypto hiding and 8-bit salt dictionary control", "dictionary attack on hidden values"),
    ("staller stops at step 9", "refusal to participate"),
    ("staller stops at step 13 after committing", "refusal to participate"),
    ("replayer re-sends last draw's announce", "replay of earlier traffic"),
    ("fault-script replay of every structure kind", "replay of earlier traffic"),
    ("constant-input coalition against one honest party", "coalition bias"),
    ("in-flight tamper of every step", "message tampering in transit"),
];

/// Renders [`THREAT_COVERAGE`] as a two-column text table.
pub fn coverage_table() -> String {
    let width = THREAT_COVERAGE
        .iter()
        .map(|(s, _)| s.len())
        .max()
        .unwrap_or(0);
    let mut out = format!("{:<width$}  threat\n", "scenario");
    for (scenario, threat) in THREAT_COVERAGE {
        out.push_str(&format!("{scenario:<width$}  {threat}\n"));
    }
    out
}
