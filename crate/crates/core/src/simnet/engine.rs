use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use crate::codec::{peek_tag, signature_blocks, StructureTag};
use crate::crypto::EntropySource;
use crate::permutation::Permutation;
use crate::protocol::{
    AbortCause, Destination, Guarantor, GuarantorReveal, Initiator, InitiatorReveal,
    Member, Message, NumberChoice, Output, Participant, PartyConfig, PartyId,
    PermutationChoice, Role, Roster, VerificationCache, INITIATOR,
};
use crate::register::{DrawRegister, DrawStatus, DrawTranscript, TranscriptHeader};

use super::{
    FaultAction, FaultTrigger, Latency, PartyReport, PartySpec, ReplayRef, RunOutcome, RunStatus,
    SecretRecord, SimError, SimSchedule, Strategy, TraceEntry,
};

/// Number of past draws whose traffic is kept for replays and the forgery
/// check.
const HISTORY_DRAWS: usize = 8;

type SignatureKey = (String, Vec<u8>);

#[derive(Debug)]
struct DrawHistory {
    draw_no: u64,
    trace: Vec<TraceEntry>,
    emitted: HashSet<SignatureKey>,
}

/// A fixed set of participants running draws one after another.
#[derive(Debug)]
pub struct Simulation {
    roster: Roster,
    specs: Vec<PartySpec>,
    registers: Option<Vec<DrawRegister>>,
    next_draw: u64,
    history: VecDeque<DrawHistory>,
}

/// Runs a single draw with fresh registers.
pub fn run_draw(
    parties: Vec<PartySpec>,
    k: u64,
    schedule: &SimSchedule,
) -> Result<RunOutcome, SimError> {
    Simulation::new(parties)?.run_draw(k, schedule)
}

impl Simulation {
    /// The first party must be the initiator, the rest guarantors.
    pub fn new(parties: Vec<PartySpec>) -> Result<Self, SimError> {
        let roster = Roster::new(
            parties
                .iter()
                .map(|p| Member {
                    name: p.name.clone(),
                    role: p.role,
                    public_key: p.key.public_key(),
                })
                .collect(),
        )?;
        for p in &parties {
            if !p.strategy.allowed_for(p.role) {
                return Err(SimError::StrategyRole {
                    strategy: p.strategy,
                    role: p.role.name(),
                });
            }
        }
        let n = parties.len();
        Ok(Self {
            roster,
            specs: parties,
            registers: Some(vec![DrawRegister::new(); n]),
            next_draw: 1,
            history: VecDeque::new(),
        })
    }

    /// Skips per-party registers and their transcript verification. Used by
    /// long statistical experiments; draw numbers still advance.
    pub fn without_registers(mut self) -> Self {
        self.registers = None;
        self
    }

    /// Continues from existing registers, one per party in roster order.
    pub fn with_registers(mut self, registers: Vec<DrawRegister>) -> Result<Self, SimError> {
        if registers.len() != self.specs.len() {
            return Err(SimError::RegisterCount {
                expected: self.specs.len(),
                got: registers.len(),
            });
        }
        self.next_draw = registers.first().map_or(1, DrawRegister::next_draw_number);
        self.registers = Some(registers);
        Ok(self)
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn parties(&self) -> &[PartySpec] {
        &self.specs
    }

    pub fn registers(&self) -> Option<&[DrawRegister]> {
        self.registers.as_deref()
    }

    /// Recorded wire traffic of an earlier draw still in the history window.
    pub fn recorded(&self, draw_no: u64) -> Option<&[TraceEntry]> {
        self.history
            .iter()
            .find(|h| h.draw_no == draw_no)
            .map(|h| h.trace.as_slice())
    }

    fn draw_no_for(&self, party: PartyId) -> u64 {
        match &self.registers {
            Some(regs) => regs[party].next_draw_number(),
            None => self.next_draw,
        }
    }

    pub fn run_draw(&mut self, k: u64, schedule: &SimSchedule) -> Result<RunOutcome, SimError> {
        for f in &schedule.faults {
            if f.to.is_some_and(|to| to >= self.roster.len()) {
                return Err(SimError::UnknownParty(f.to.unwrap_or_default()));
            }
        }
        let verified = VerificationCache::new();
        let mut nodes = Vec::with_capacity(self.specs.len());
        for (id, spec) in self.specs.iter().enumerate() {
            let draw_no = self.draw_no_for(id);
            let seed = EntropySource::derive_seed(
                &schedule.seed,
                &[b"party", spec.name.as_bytes(), &draw_no.to_be_bytes()],
            );
            let cfg = PartyConfig {
                roster: self.roster.clone(),
                me: id,
                key: spec.key.clone(),
                draw_no,
                entropy: EntropySource::seeded(seed),
                abort_mode: Default::default(),
                verified: verified.clone(),
            };
            nodes.push(match spec.role {
                Role::Initiator => {
                    let choice = match spec.strategy {
                        Strategy::Constant(v) => NumberChoice::Fixed(v),
                        _ => NumberChoice::Random,
                    };
                    Node::Initiator(Initiator::new(cfg, k, choice)?)
                }
                Role::Guarantor => {
                    let choice = match spec.strategy {
                        Strategy::Constant(v) => PermutationChoice::Fixed(v),
                        _ => PermutationChoice::Random,
                    };
                    Node::Guarantor(Guarantor::new(cfg, choice)?)
                }
            });
        }
        let draw_no = nodes[INITIATOR].participant().draw_no();
        let net_seed =
            EntropySource::derive_seed(&schedule.seed, &[b"network", &draw_no.to_be_bytes()]);
        let mut run = Run {
            sim: self,
            schedule,
            n: nodes.len(),
            nodes,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            link_clock: HashMap::new(),
            net: EntropySource::seeded(net_seed),
            fired: vec![false; schedule.faults.len()],
            trace: Vec::new(),
            emitted: HashSet::new(),
            armed: Vec::new(),
            held: Vec::new(),
            forged: HashMap::new(),
        };
        run.armed = vec![None; run.n];
        run.execute()?;
        let Run {
            nodes,
            trace,
            emitted,
            now,
            ..
        } = run;

        let mut parties = Vec::with_capacity(nodes.len());
        for (id, node) in nodes.iter().enumerate() {
            let p = node.participant();
            let outcome = p
                .outcome()
                .cloned()
                .expect("every party is terminal after the run");
            let transcript = DrawTranscript {
                header: TranscriptHeader {
                    roster: self.roster.clone(),
                    draw_no: p.draw_no(),
                    k: node.k().unwrap_or(k),
                    status: DrawStatus::from(&outcome),
                },
                structures: p.transcript(),
            };
            let spec = &self.specs[id];
            parties.push(PartyReport {
                name: spec.name.clone(),
                role: spec.role,
                strategy: spec.strategy,
                outcome,
                transcript,
                secret: node.secret(),
            });
        }
        let status = summarize(&parties)?;
        if let Some(regs) = &mut self.registers {
            for (reg, report) in regs.iter_mut().zip(&parties) {
                reg.append(&report.transcript, &self.roster)?;
            }
        }
        self.history.push_back(DrawHistory {
            draw_no,
            trace: trace.clone(),
            emitted,
        });
        if self.history.len() > HISTORY_DRAWS {
            self.history.pop_front();
        }
        self.next_draw += 1;
        Ok(RunOutcome {
            draw_no,
            status,
            parties,
            trace,
            duration_ms: now,
        })
    }
}

/// Completed when every honest party completed (every party, if none is
/// honest); otherwise the first relevant abort, initiator first.
fn summarize(parties: &[PartyReport]) -> Result<RunStatus, SimError> {
    let any_honest = parties.iter().any(|p| p.strategy.is_honest());
    let judged: Vec<&PartyReport> = parties
        .iter()
        .filter(|p| !any_honest || p.strategy.is_honest())
        .collect();
    if let Some(abort) = judged.iter().find_map(|p| p.outcome.abort()) {
        return Ok(RunStatus::Aborted(abort.clone()));
    }
    let mut results: Vec<u64> = judged.iter().filter_map(|p| p.outcome.result()).collect();
    results.dedup();
    match results[..] {
        [r] => Ok(RunStatus::Completed(r)),
        _ => Err(SimError::Disagreement(results)),
    }
}

#[derive(Debug)]
#[allow(clippy::large_enum_variant)]
enum Node {
    Initiator(Initiator),
    Guarantor(Guarantor),
}

impl Node {
    fn participant(&self) -> &dyn Participant {
        match self {
            Node::Initiator(p) => p,
            Node::Guarantor(p) => p,
        }
    }

    fn participant_mut(&mut self) -> &mut dyn Participant {
        match self {
            Node::Initiator(p) => p,
            Node::Guarantor(p) => p,
        }
    }

    fn k(&self) -> Option<u64> {
        match self {
            Node::Initiator(p) => Some(p.k()),
            Node::Guarantor(p) => p.k(),
        }
    }

    fn secret(&self) -> Option<SecretRecord> {
        match self {
            Node::Initiator(p) => p.secret().map(|s| SecretRecord {
                salt: s.salt.clone(),
                secret_bytes: s.secret_bytes(),
            }),
            Node::Guarantor(p) => p.secret().map(|s| SecretRecord {
                salt: s.salt.clone(),
                secret_bytes: s.secret_bytes(),
            }),
        }
    }

    fn committed_permutation(&self) -> Option<Permutation> {
        match self {
            Node::Guarantor(p) => p.secret().map(|s| s.permutation.clone()),
            Node::Initiator(_) => None,
        }
    }

    /// The reveal a reneging party sends instead of the committed one.
    fn renege_reveal(&self) -> Option<Vec<u8>> {
        match self {
            Node::Initiator(p) => {
                let s = p.secret()?;
                (p.k() >= 2).then(|| p.substitute_reveal((s.number + 1) % p.k()))?
            }
            Node::Guarantor(p) => {
                let mut perm = p.secret()?.permutation.clone();
                if perm.k() < 2 {
                    return None;
                }
                perm.swap_images(0, 1).ok()?;
                p.substitute_reveal(perm)
            }
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
enum EventKind {
    Deliver {
        from: PartyId,
        to: PartyId,
        bytes: Vec<u8>,
    },
    Timer {
        party: PartyId,
        epoch: u64,
    },
}

#[derive(Debug, PartialEq, Eq)]
struct Event {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct Run<'a> {
    sim: &'a Simulation,
    schedule: &'a SimSchedule,
    n: usize,
    nodes: Vec<Node>,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: u64,
    link_clock: HashMap<(PartyId, PartyId), u64>,
    net: EntropySource,
    fired: Vec<bool>,
    trace: Vec<TraceEntry>,
    emitted: HashSet<SignatureKey>,
    armed: Vec<Option<u64>>,
    held: Vec<(PartyId, Destination, Vec<u8>)>,
    forged: HashMap<PartyId, Vec<u8>>,
}

impl Run<'_> {
    fn strategy(&self, p: PartyId) -> Strategy {
        self.sim.specs[p].strategy
    }

    fn name(&self, p: PartyId) -> &str {
        &self.sim.specs[p].name
    }

    fn all_terminal(&self) -> bool {
        self.nodes.iter().all(|n| n.participant().outcome().is_some())
    }

    fn execute(&mut self) -> Result<(), SimError> {
        for p in 0..self.n {
            let out = self.nodes[p].participant_mut().start();
            self.emit(p, out)?;
        }
        for p in 0..self.n {
            if let Strategy::Replayer { kind } = self.strategy(p) {
                self.replay_latest(p, kind)?;
            }
        }
        self.arm_timers();
        while let Some(Reverse(ev)) = self.queue.pop() {
            if self.all_terminal() {
                break;
            }
            if ev.time > self.schedule.horizon_ms {
                self.now = self.schedule.horizon_ms;
                break;
            }
            self.now = ev.time;
            match ev.kind {
                EventKind::Deliver { from, to, bytes } => {
                    let out = self.nodes[to].participant_mut().handle(from, &bytes);
                    self.emit(to, out)?;
                }
                EventKind::Timer { party, epoch } => {
                    let p = self.nodes[party].participant_mut();
                    if p.epoch() == epoch {
                        let out = p.on_timeout();
                        self.emit(party, out)?;
                    }
                }
            }
            self.release_held()?;
            self.arm_timers();
        }
        for p in 0..self.n {
            if self.nodes[p].participant().outcome().is_none() {
                let out = self.nodes[p].participant_mut().halt(AbortCause::Timeout);
                self.emit(p, out)?;
            }
        }
        Ok(())
    }

    fn push(&mut self, time: u64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(Event {
            time,
            seq: self.seq,
            kind,
        }));
    }

    fn arm_timers(&mut self) {
        for p in 0..self.n {
            let (waiting, epoch) = {
                let part = self.nodes[p].participant();
                (part.is_waiting(), part.epoch())
            };
            if waiting && self.armed[p] != Some(epoch) {
                self.armed[p] = Some(epoch);
                let at = self.now + self.schedule.timeout_ms;
                self.push(at, EventKind::Timer { party: p, epoch });
            }
        }
    }

    fn recipients(&self, to: Destination) -> Vec<PartyId> {
        match to {
            Destination::Initiator => vec![INITIATOR],
            Destination::Guarantor(g) => vec![g],
            Destination::AllGuarantors => (1..self.n).collect(),
        }
    }

    fn emit(&mut self, p: PartyId, outputs: Vec<Output>) -> Result<(), SimError> {
        for o in outputs {
            if let Output::Send { to, bytes } = o {
                self.outbound(p, to, bytes)?;
            }
        }
        Ok(())
    }

    /// Applies the sender's strategy, then puts the message on the wire.
    fn outbound(&mut self, p: PartyId, to: Destination, bytes: Vec<u8>) -> Result<(), SimError> {
        let kind = peek_tag(&bytes).ok();
        let strategy = self.strategy(p);
        let is_reveal = matches!(
            kind,
            Some(StructureTag::InitiatorReveal | StructureTag::GuarantorReveal)
        );
        let bytes = match strategy {
            Strategy::Staller { stop_at_step } => {
                let step = kind.map_or(0, crate::protocol::step_of);
                if step == 0 || step >= stop_at_step {
                    return Ok(());
                }
                bytes
            }
            s if s.waits_for_reveals() && is_reveal => {
                self.held.push((p, to, bytes));
                return Ok(());
            }
            Strategy::Renege if is_reveal => self.nodes[p].renege_reveal().unwrap_or(bytes),
            _ => bytes,
        };
        self.send(p, to, bytes)
    }

    fn send(&mut self, p: PartyId, to: Destination, bytes: Vec<u8>) -> Result<(), SimError> {
        self.audit_signatures(p, &bytes)?;
        for r in self.recipients(to) {
            self.transmit(p, r, bytes.clone(), false)?;
        }
        Ok(())
    }

    /// Records signatures a party emits under its own name, and rejects
    /// adversarial messages carrying someone else's signature that was never
    /// emitted.
    fn audit_signatures(&mut self, p: PartyId, bytes: &[u8]) -> Result<(), SimError> {
        let Ok(blocks) = signature_blocks(bytes) else {
            return Ok(());
        };
        let me = self.name(p).to_owned();
        let honest = self.strategy(p).is_honest();
        for b in blocks {
            let key = (b.signer, b.signature);
            if key.0 == me {
                self.emitted.insert(key);
            } else if !honest
                && !self.emitted.contains(&key)
                && !self.sim.history.iter().any(|h| h.emitted.contains(&key))
            {
                return Err(SimError::Forgery {
                    sender: me,
                    victim: key.0,
                });
            }
        }
        Ok(())
    }

    fn latency(&mut self) -> u64 {
        match self.schedule.latency {
            Latency::Fixed(d) => d,
            Latency::Uniform { min, max } => {
                let span = max.saturating_sub(min) + 1;
                min + self.net.next_below(span).expect("span is at least 1")
            }
        }
    }

    fn schedule_delivery(&mut self, from: PartyId, to: PartyId, bytes: Vec<u8>, extra: Option<u64>) {
        let base = self.now + self.latency();
        let at = match extra {
            Some(d) => base + d,
            None => {
                let clock = self.link_clock.entry((from, to)).or_insert(0);
                let at = base.max(*clock);
                *clock = at;
                at
            }
        };
        self.push(at, EventKind::Deliver { from, to, bytes });
    }

    fn next_fault(&mut self, to: PartyId, step: u8) -> Option<FaultAction> {
        let now = self.now;
        let i = self.schedule.faults.iter().enumerate().position(|(i, f)| {
            !self.fired[i]
                && f.to.is_none_or(|t| t == to)
                && match f.trigger {
                    FaultTrigger::AtTime(t) => now >= t,
                    FaultTrigger::AtStep(s) => step == s,
                }
        })?;
        self.fired[i] = true;
        Some(self.schedule.faults[i].action)
    }

    fn transmit(
        &mut self,
        from: PartyId,
        to: PartyId,
        mut bytes: Vec<u8>,
        injected: bool,
    ) -> Result<(), SimError> {
        let kind = peek_tag(&bytes).ok();
        let step = kind.map_or(0, crate::protocol::step_of);
        let fault = self.next_fault(to, step);
        if let Some(FaultAction::Tamper(idx)) = fault {
            if !bytes.is_empty() {
                let i = idx % bytes.len();
                bytes[i] ^= 0xFF;
            }
        }
        self.trace.push(TraceEntry {
            sent_at: self.now,
            from,
            to,
            kind,
            bytes: bytes.clone(),
            fault,
            injected,
        });
        match fault {
            Some(FaultAction::Drop) => {}
            Some(FaultAction::Duplicate) => {
                self.schedule_delivery(from, to, bytes.clone(), None);
                self.schedule_delivery(from, to, bytes, None);
            }
            Some(FaultAction::Delay(d)) => self.schedule_delivery(from, to, bytes, Some(d)),
            Some(FaultAction::Replay(r)) => {
                self.schedule_delivery(from, to, bytes, None);
                let old = self.lookup(r)?;
                self.trace.push(TraceEntry {
                    sent_at: self.now,
                    from: r.from,
                    to,
                    kind: Some(r.kind),
                    bytes: old.clone(),
                    fault: None,
                    injected: true,
                });
                self.schedule_delivery(r.from, to, old, None);
            }
            Some(FaultAction::Tamper(_)) | None => self.schedule_delivery(from, to, bytes, None),
        }
        Ok(())
    }

    fn lookup(&self, r: ReplayRef) -> Result<Vec<u8>, SimError> {
        self.sim
            .recorded(r.draw_no)
            .and_then(|trace| {
                trace
                    .iter()
                    .find(|e| !e.injected && e.from == r.from && e.kind == Some(r.kind))
            })
            .map(|e| e.bytes.clone())
            .ok_or(SimError::ReplayNotFound {
                draw_no: r.draw_no,
                kind: r.kind,
                from: r.from,
            })
    }

    /// A replayer re-sends the newest recorded structure of `kind`.
    fn replay_latest(&mut self, p: PartyId, kind: StructureTag) -> Result<(), SimError> {
        let found = self.sim.history.iter().rev().find_map(|h| {
            h.trace
                .iter()
                .find(|e| !e.injected && e.kind == Some(kind))
                .map(|e| e.bytes.clone())
        });
        let Some(bytes) = found else {
            return Ok(());
        };
        self.audit_signatures(p, &bytes)?;
        for r in (0..self.n).filter(|&r| r != p) {
            self.transmit(p, r, bytes.clone(), false)?;
        }
        Ok(())
    }

    fn revealed_on_wire(&self, g: PartyId) -> Option<&TraceEntry> {
        self.trace.iter().find(|e| {
            e.from == g && !e.injected && e.kind == Some(StructureTag::GuarantorReveal)
        })
    }

    fn release_held(&mut self) -> Result<(), SimError> {
        if self.held.is_empty() {
            return Ok(());
        }
        let honest_done = (1..self.n)
            .filter(|&g| !self.strategy(g).waits_for_reveals())
            .all(|g| self.revealed_on_wire(g).is_some());
        if !honest_done {
            return Ok(());
        }
        let leader = (1..self.n)
            .find(|&g| matches!(self.strategy(g), Strategy::AdaptiveReveal { .. }));
        for (p, to, bytes) in std::mem::take(&mut self.held) {
            let bytes = match self.strategy(p) {
                Strategy::AdaptiveReveal { target } if Some(p) == leader => {
                    match self.forged.get(&p) {
                        Some(f) => f.clone(),
                        None => {
                            let f = self.force_target(p, target).unwrap_or(bytes);
                            self.forged.insert(p, f.clone());
                            f
                        }
                    }
                }
                _ => bytes,
            };
            self.send(p, to, bytes)?;
        }
        Ok(())
    }

    /// Builds the reveal that would make the result equal `target`, given the
    /// initiator's revealed number, the honest reveals seen on the wire and
    /// the coalition's committed permutations. When the committed permutation
    /// already yields `target`, two other images are swapped so the attempt
    /// still differs from the commitment.
    fn force_target(&self, adversary: PartyId, target: u64) -> Option<Vec<u8>> {
        let a = self.trace.iter().find_map(|e| {
            match (e.kind, e.injected) {
                (Some(StructureTag::InitiatorReveal), false) => {
                    match Message::decode(&e.bytes).ok()? {
                        Message::InitiatorReveal(InitiatorReveal { secret, .. }) => {
                            Some(secret.number)
                        }
                        _ => None,
                    }
                }
                _ => None,
            }
        })?;
        let mut perms = Vec::with_capacity(self.n - 1);
        for g in 1..self.n {
            let perm = if self.strategy(g).waits_for_reveals() {
                self.nodes[g].committed_permutation()?
            } else {
                match Message::decode(&self.revealed_on_wire(g)?.bytes).ok()? {
                    Message::GuarantorReveal(GuarantorReveal { secret, .. }) => secret.permutation,
                    _ => return None,
                }
            };
            perms.push(perm);
        }
        let j = adversary - 1;
        let k = perms[j].k();
        let x = perms[j + 1..]
            .iter()
            .rev()
            .try_fold(a, |acc, p| p.apply(acc))
            .ok()?;
        let y = perms[..j]
            .iter()
            .try_fold(target % k, |acc, p| p.inverse().apply(acc))
            .ok()?;
        let mut forged = perms[j].clone();
        if forged.apply(x).ok()? != y {
            let x2 = forged.inverse().apply(y).ok()?;
            forged.swap_images(x, x2).ok()?;
        } else if k >= 3 {
            let mut others = (0..k).filter(|&v| v != x);
            let (u, v) = (others.next()?, others.next()?);
            forged.swap_images(u, v).ok()?;
        } else {
            return None;
        }
        match &self.nodes[adversary] {
            Node::Guarantor(g) => g.substitute_reveal(forged),
            Node::Initiator(_) => None,
        }
    }
}
