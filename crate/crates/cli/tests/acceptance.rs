//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any fails. Extra non-flag arguments select
//! criteria whose name contains one of them.

use std::collections::HashSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use fairdraw::codec::StructureTag;
use fairdraw::crypto::{sha3_256, EntropySource, KeyPair, Scheme};
use fairdraw::permutation::{Permutation, XorMap};
use fairdraw::protocol::{AbortCause, GuarantorReveal, InitiatorReveal, Message, Role};
use fairdraw::register::{verify_transcript_bytes, Verdict};
use fairdraw::simnet::{
    coalition_bias_experiment, run_draw, Fault, FaultAction, FaultTrigger, PartySpec, ReplayRef,
    SimError, SimSchedule, Simulation, Strategy,
};
use sha3::{Digest, Keccak256};

type Check = fn() -> Result<String, String>;

struct Criterion {
    number: u8,
    name: &'static str,
    limit: Option<Duration>,
    check: Check,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        number: 1,
        name: "xor-lemma",
        limit: Some(Duration::from_secs(1)),
        check: xor_lemma,
    },
    Criterion {
        number: 2,
        name: "uniform-permutations",
        limit: Some(Duration::from_secs(10)),
        check: uniform_permutations,
    },
    Criterion {
        number: 3,
        name: "end-to-end-uniformity",
        limit: Some(Duration::from_secs(120)),
        check: end_to_end_uniformity,
    },
    Criterion {
        number: 4,
        name: "one-honest-party",
        limit: None,
        check: one_honest_party,
    },
    Criterion {
        number: 5,
        name: "commitment-binding",
        limit: None,
        check: commitment_binding,
    },
    Criterion {
        number: 6,
        name: "replay-defense",
        limit: None,
        check: replay_defense,
    },
    Criterion {
        number: 7,
        name: "transcript-soundness",
        limit: None,
        check: transcript_soundness,
    },
    Criterion {
        number: 8,
        name: "secrecy-ordering",
        limit: None,
        check: secrecy_ordering,
    },
    Criterion {
        number: 9,
        name: "cli-determinism",
        limit: None,
        check: cli_determinism,
    },
    Criterion {
        number: 10,
        name: "hash-conformance",
        limit: None,
        check: hash_conformance,
    },
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<&Criterion> = CRITERIA
        .iter()
        .filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str())))
        .collect();
    if selected.is_empty() {
        return ExitCode::SUCCESS;
    }
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &selected {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!(
                "took {:.2}s, limit {:.0}s",
                elapsed.as_secs_f64(),
                limit.as_secs_f64()
            )),
            (o, _) => o,
        };
        let (verdict, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} {:<22} {verdict} [{:.2}s] {detail}",
            c.number,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", selected.len() - failed, selected.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn seed(n: u64) -> [u8; 32] {
    let mut s = [0u8; 32];
    s[24..].copy_from_slice(&n.to_be_bytes());
    s
}

fn key(name: &str) -> KeyPair {
    let s = EntropySource::derive_seed(&seed(0xacce), &[name.as_bytes()]);
    KeyPair::generate(Scheme::Ed25519, &mut EntropySource::seeded(s))
}

fn name_of(position: usize) -> String {
    if position == 0 {
        "i".into()
    } else {
        format!("g{position}")
    }
}

/// Initiator `i` then guarantors `g1..`, one strategy each.
fn parties(strategies: &[Strategy]) -> Vec<PartySpec> {
    strategies
        .iter()
        .enumerate()
        .map(|(p, &strategy)| PartySpec {
            name: name_of(p),
            role: if p == 0 { Role::Initiator } else { Role::Guarantor },
            strategy,
            key: key(&name_of(p)),
        })
        .collect()
}

/// Pearson statistic against a uniform expectation, computed directly.
fn pearson(bins: &[u64]) -> f64 {
    let total: u64 = bins.iter().sum();
    let expected = total as f64 / bins.len() as f64;
    bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum()
}

fn xor_lemma() -> Result<String, String> {
    const BITS: u32 = 4;
    let domain = 1u64 << BITS;
    for b in 0..domain {
        let map = XorMap::new(b, BITS).map_err(|e| e.to_string())?;
        let mut seen = HashSet::new();
        for a in 0..domain {
            let image = map.apply(a).map_err(|e| e.to_string())?;
            ensure(image == a ^ b, || format!("b={b}: {a} maps to {image}"))?;
            ensure(map.apply(image).unwrap() == a, || format!("b={b}: not an involution at {a}"))?;
            seen.insert(image);
        }
        ensure(seen.len() == domain as usize, || format!("b={b}: not a bijection"))?;
        let p = map.as_permutation();
        ensure(p.compose(&p).unwrap().is_identity(), || format!("b={b}: square is not identity"))?;
    }
    Ok(format!("all {domain} maps on {domain} values are self-inverse bijections"))
}

fn uniform_permutations() -> Result<String, String> {
    const SAMPLES: u64 = 60_000;
    const CRITICAL_5_DF: f64 = 20.52;
    let s3: [[u64; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut bins = [0u64; 6];
    let mut src = EntropySource::seeded(seed(2));
    for _ in 0..SAMPLES {
        let p = Permutation::random(3, &mut src).map_err(|e| e.to_string())?;
        let idx = s3
            .iter()
            .position(|m| m[..] == *p.as_slice())
            .ok_or_else(|| format!("{:?} is not a permutation of 0..3", p.as_slice()))?;
        bins[idx] += 1;
    }
    let stat = pearson(&bins);
    ensure(bins.iter().all(|&b| b > 0), || format!("missing permutation: {bins:?}"))?;
    ensure((stat - fairdraw::stats::chi_square(&bins)).abs() < 1e-9, || {
        "library statistic disagrees".into()
    })?;
    ensure(stat < CRITICAL_5_DF, || format!("chi-square {stat:.3} >= {CRITICAL_5_DF}, bins {bins:?}"))?;
    Ok(format!("chi-square {stat:.3} < {CRITICAL_5_DF} over {SAMPLES} samples, bins {bins:?}"))
}

fn end_to_end_uniformity() -> Result<String, String> {
    const TRIALS: u64 = 100_000;
    const CRITICAL_9_DF: f64 = 27.88;
    let honest = parties(&[Strategy::Honest; 3]);
    let report = coalition_bias_experiment(honest, 10, TRIALS, &SimSchedule::new(seed(3)))
        .map_err(|e| e.to_string())?;
    ensure(report.aborted_runs == 0, || format!("{} honest draws aborted", report.aborted_runs))?;
    ensure(report.completed() == TRIALS, || format!("only {} draws", report.completed()))?;
    let stat = pearson(&report.bins);
    ensure(stat < CRITICAL_9_DF, || format!("chi-square {stat:.3} >= {CRITICAL_9_DF}, bins {:?}", report.bins))?;
    Ok(format!("chi-square {stat:.3} < {CRITICAL_9_DF} over {TRIALS} draws"))
}

fn one_honest_party() -> Result<String, String> {
    const TRIALS: u64 = 60_000;
    const CRITICAL_2_DF: f64 = 13.82;
    use Strategy::{Constant as C, Honest as H, WaitsButComplies as W};
    let setups: [(&str, [Strategy; 3]); 6] = [
        ("honest i, constant g1 g2", [H, C(1), C(2)]),
        ("honest i, waiting g1 g2", [H, W, W]),
        ("honest g1, constant i g2", [C(2), H, C(1)]),
        ("honest g1, constant i, waiting g2", [C(0), H, W]),
        ("honest g2, constant i g1", [C(1), C(2), H]),
        ("honest g2, constant i, waiting g1", [C(2), W, H]),
    ];
    let mut stats = Vec::new();
    for (n, (label, strategies)) in setups.iter().enumerate() {
        let report =
            coalition_bias_experiment(parties(strategies), 3, TRIALS, &SimSchedule::new(seed(40 + n as u64)))
                .map_err(|e| format!("{label}: {e}"))?;
        ensure(report.completed() == TRIALS, || {
            format!("{label}: {} completed, {} aborted", report.completed(), report.aborted_runs)
        })?;
        let stat = pearson(&report.bins);
        ensure(stat < CRITICAL_2_DF, || format!("{label}: chi-square {stat:.3}, bins {:?}", report.bins))?;
        stats.push(format!("{stat:.2}"));
    }
    let rigged = parties(&[C(1), C(2), C(0)]);
    let control = coalition_bias_experiment(rigged, 3, TRIALS, &SimSchedule::new(seed(49)))
        .map_err(|e| e.to_string())?;
    let control_stat = pearson(&control.bins);
    ensure(control.completed() == TRIALS && control_stat >= CRITICAL_2_DF, || {
        format!("negative control passed: chi-square {control_stat:.3}")
    })?;
    Ok(format!(
        "six coalitions chi-square [{}] < {CRITICAL_2_DF}; all-adversarial control {control_stat:.0} fails",
        stats.join(", ")
    ))
}

/// Result the adversary's reveal would have produced had it been accepted.
fn forced_result(trace: &[fairdraw::simnet::TraceEntry], n: usize) -> Option<u64> {
    let mut number = None;
    let mut perms: Vec<Option<Permutation>> = vec![None; n];
    for e in trace.iter().filter(|e| !e.injected && e.fault.is_none()) {
        match Message::decode(&e.bytes).ok()? {
            Message::InitiatorReveal(InitiatorReveal { secret, .. }) => number = Some(secret.number),
            Message::GuarantorReveal(GuarantorReveal { secret, .. }) => {
                perms[e.from] = Some(secret.permutation)
            }
            _ => {}
        }
    }
    let mut value = number?;
    for p in perms[1..].iter().rev() {
        value = p.as_ref()?.as_slice()[value as usize];
    }
    Some(value)
}

fn commitment_binding() -> Result<String, String> {
    const ATTEMPTS: u64 = 100;
    let mut attempts = 0;
    for position in [1usize, 2] {
        for target in 0..3 {
            let mut strategies = [Strategy::Honest; 3];
            strategies[position] = Strategy::AdaptiveReveal { target };
            for s in 0..ATTEMPTS {
                let run = run_draw(parties(&strategies), 3, &SimSchedule::new(seed(5000 + s)))
                    .map_err(|e| e.to_string())?;
                let label = format!("g{position} targeting {target}, seed {s}");
                let abort = run.abort().ok_or_else(|| format!("{label}: draw completed"))?;
                ensure(abort.cause == AbortCause::BadHash, || format!("{label}: {abort}"))?;
                ensure(abort.culprit.as_deref() == Some(name_of(position).as_str()), || {
                    format!("{label}: {abort}")
                })?;
                ensure(forced_result(&run.trace, 3) == Some(target), || {
                    format!("{label}: forged reveal does not force the target")
                })?;
                attempts += 1;
            }
        }
    }
    Ok(format!("{attempts} of {attempts} target-forcing reveals aborted with bad-hash naming the adversary"))
}

fn replay_defense() -> Result<String, String> {
    let mut triggers = vec![FaultTrigger::AtTime(0)];
    triggers.extend((1..=14).map(FaultTrigger::AtStep));
    let mut injections = 0;
    let mut aborted = 0;
    let mut ignored = 0;
    for kind in StructureTag::PROTOCOL {
        let mut kind_injections = 0;
        for from in 0..3 {
            for to in (0..3).filter(|&t| t != from) {
                for &trigger in &triggers {
                    let mut sim = Simulation::new(parties(&[Strategy::Honest; 3])).map_err(|e| e.to_string())?;
                    sim.run_draw(5, &SimSchedule::new(seed(6))).map_err(|e| e.to_string())?;
                    let old: Vec<Vec<u8>> = sim
                        .recorded(1)
                        .unwrap_or_default()
                        .iter()
                        .filter(|e| e.kind == Some(kind) && e.from == from)
                        .map(|e| e.bytes.clone())
                        .collect();
                    let fault = Fault::new(trigger, FaultAction::Replay(ReplayRef { draw_no: 1, kind, from })).to(to);
                    let run = match sim.run_draw(5, &SimSchedule::new(seed(7)).with_fault(fault)) {
                        Ok(run) => run,
                        Err(SimError::ReplayNotFound { .. }) => continue,
                        Err(e) => return Err(e.to_string()),
                    };
                    let label = format!("{kind} from {from} to {to} at {trigger:?}");
                    let fired = run.trace.iter().any(|e| e.injected);
                    if !fired {
                        continue;
                    }
                    injections += 1;
                    kind_injections += 1;
                    if run.abort().is_some() {
                        aborted += 1;
                        continue;
                    }
                    let accepted = run
                        .parties
                        .iter()
                        .any(|p| p.transcript.structures.iter().any(|s| old.contains(s)));
                    ensure(!accepted, || format!("{label}: replayed structure entered a transcript"))?;
                    ensure(run.honest_transcripts_agree(), || format!("{label}: transcripts diverged"))?;
                    ignored += 1;
                }
            }
        }
        ensure(kind_injections > 0, || format!("{kind}: no injection fired"))?;

        let mut strategies = [Strategy::Honest; 3];
        strategies[2] = Strategy::Replayer { kind };
        let mut sim = Simulation::new(parties(&strategies)).map_err(|e| e.to_string())?;
        sim.run_draw(5, &SimSchedule::new(seed(8))).map_err(|e| e.to_string())?;
        let run = sim.run_draw(5, &SimSchedule::new(seed(9))).map_err(|e| e.to_string())?;
        ensure(run.abort().is_some(), || format!("replaying participant sending {kind}: draw completed"))?;
        injections += 1;
        aborted += 1;
    }
    Ok(format!(
        "{injections} injections over 12 kinds: {aborted} aborted, {ignored} arriving after the draw concluded were discarded"
    ))
}

fn transcript_soundness() -> Result<String, String> {
    let run = run_draw(parties(&[Strategy::Honest; 3]), 10, &SimSchedule::new(seed(11)))
        .map_err(|e| e.to_string())?;
    let result = run.result().ok_or("honest draw aborted")?;
    let roster = Simulation::new(parties(&[Strategy::Honest; 3])).unwrap().roster().clone();
    let bytes = run.parties[0].transcript.to_bytes();
    ensure(verify_transcript_bytes(&bytes, &roster) == Verdict::Valid { result }, || {
        "untampered transcript does not verify".into()
    })?;
    let mut cases = 0;
    for mask in [0xFFu8, 0x01] {
        for i in 0..bytes.len() {
            let mut flipped = bytes.clone();
            flipped[i] ^= mask;
            let verdict = verify_transcript_bytes(&flipped, &roster);
            ensure(!verdict.is_valid(), || format!("byte {i} ^ {mask:#04x} still verifies"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} of {cases} single-byte flips over {} bytes rejected; original valid", bytes.len()))
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

fn secrecy_ordering() -> Result<String, String> {
    const RUNS: u64 = 1000;
    let mut scanned = 0usize;
    for r in 0..RUNS {
        let n = 3 + (r % 3) as usize;
        let k = 2 + r % 19;
        let run = run_draw(parties(&vec![Strategy::Honest; n]), k, &SimSchedule::new(seed(80_000 + r)))
            .map_err(|e| e.to_string())?;
        ensure(run.result().is_some(), || format!("run {r} aborted"))?;
        let (early, late): (Vec<_>, Vec<_>) = run.trace.iter().partition(|e| e.step() < 12);
        for p in &run.parties {
            let secret = p.secret.as_ref().ok_or_else(|| format!("run {r}: {} has no secret", p.name))?;
            let value_field = match p.role {
                Role::Initiator => 1 + 4 + 8,
                Role::Guarantor => 1 + 4 + 4 + 8 * k as usize,
            };
            let value = &secret.secret_bytes[secret.secret_bytes.len() - value_field..];
            for needle in [&secret.salt.as_bytes()[..], value] {
                if let Some(e) = early.iter().find(|e| contains(&e.bytes, needle)) {
                    return Err(format!("run {r}: secret of {} visible at step {}", p.name, e.step()));
                }
                ensure(late.iter().any(|e| contains(&e.bytes, needle)), || {
                    format!("run {r}: scanner did not find {}'s reveal", p.name)
                })?;
            }
        }
        scanned += early.len();
    }
    Ok(format!("{scanned} pre-reveal messages over {RUNS} runs hold no salt or committed value"))
}

fn fairdraw_bin(dir: &Path, args: &[&str], env_seed: Option<&str>) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fairdraw"));
    cmd.current_dir(dir).args(args).env_remove("FAIRDRAW_SEED");
    if let Some(s) = env_seed {
        cmd.env("FAIRDRAW_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn cli_determinism() -> Result<String, String> {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let path = dir.path();
    let mut roster = String::new();
    for (n, name) in ["i", "g1", "g2"].iter().enumerate() {
        let out = fairdraw_bin(path, &["keygen", "--out", name, "--seed", &(n + 10).to_string()], None);
        ensure(out.status.success(), || format!("keygen failed: {out:?}"))?;
        let role = if n == 0 { "initiator" } else { "guarantor" };
        roster.push_str(&format!("{role} {name} {name}.pub {name}.sec\n"));
    }
    fs::write(path.join("roster.txt"), roster).map_err(|e| e.to_string())?;
    let run = |out_dir: &str, flag: &str, env: Option<&str>| {
        let out = fairdraw_bin(
            path,
            &["run", "--roster", "roster.txt", "--k", "10", "--seed", flag, "--out-dir", out_dir],
            env,
        );
        let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
        let first = stdout.lines().next().unwrap_or_default().to_owned();
        let files: Vec<Vec<u8>> = ["i", "g1", "g2"]
            .iter()
            .map(|p| fs::read(path.join(out_dir).join(p).join("draw-000001.fdrw")).unwrap_or_default())
            .collect();
        (out.status.success(), first, files)
    };
    let a = run("a", "1234", None);
    let b = run("b", "1234", None);
    let c = run("c", "1", Some("1234"));
    for (label, other) in [("repeat", &b), ("environment seed", &c)] {
        ensure(a.0 && other.0, || "run failed".into())?;
        ensure(a.1 == other.1, || format!("{label}: `{}` vs `{}`", a.1, other.1))?;
        ensure(a.2 == other.2 && a.2.iter().all(|f| !f.is_empty()), || {
            format!("{label}: transcripts differ")
        })?;
    }
    let verify = fairdraw_bin(
        path,
        &["verify", "--transcript", "a/i/draw-000001.fdrw", "--roster", "roster.txt"],
        None,
    );
    ensure(verify.status.success(), || "transcript from run does not verify".into())?;
    Ok(format!("three runs print `{}` with byte-identical transcripts", a.1))
}

fn hash_conformance() -> Result<String, String> {
    let vectors: [(&[u8], &str); 4] = [
        (b"", "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a"),
        (b"abc", "3a985da74fe225b2045c172d6bd390bd855f086e3e9d525b46bfe24511431532"),
        (
            b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
            "41c0dba2a9d6240849100376a8235e2c82e1b9998a999e21db32dd97496d3376",
        ),
        (&[0xa3; 200], "79f38adec5c20307a98ef76e8324afbfd46cfd81b22e3973c65fa1bd9de31787"),
    ];
    for (msg, expected) in vectors {
        let got = hex::encode(sha3_256(msg));
        ensure(got == expected, || format!("{}-byte vector: {got}", msg.len()))?;
    }
    let quoted = "c89efdaa54c0f20c7adf612882df0950f5a951637e0307cdbc4c672f298b8bc6";
    let sha3_of_one = hex::encode(sha3_256(b"1"));
    ensure(sha3_of_one != quoted, || "quoted digest unexpectedly matches SHA3-256".into())?;
    let mut keccak = hex::encode(Keccak256::digest(b"1")).into_bytes();
    keccak.swap(48, 49);
    ensure(keccak == quoted.as_bytes(), || "quoted digest is not a transposed Keccak-256".into())?;
    Ok(format!(
        "4 standard vectors match; quoted digest of \"1\" is Keccak-256 with digits 48/49 swapped, SHA3-256 gives {}…",
        &sha3_of_one[..16]
    ))
}
