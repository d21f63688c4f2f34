mod common;

use common::{honest, parties, parties_with, schedule};
use fairdraw::codec::StructureTag;
use fairdraw::crypto::Scheme;
use fairdraw::protocol::AbortCause;
use fairdraw::simnet::{
    coalition_bias_experiment, coverage_table, run_draw, Fault, FaultAction, FaultTrigger,
    Latency, ReplayRef, RunOutcome, Scenario, SimError, Simulation, Strategy, THREAT_COVERAGE,
};

fn fingerprint(run: &RunOutcome) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = run.trace.iter().map(|e| e.bytes.clone()).collect();
    out.extend(run.parties.iter().map(|p| p.transcript.to_bytes()));
    out.push(format!("{:?} {}", run.status, run.duration_ms).into_bytes());
    out
}

#[test]
fn honest_draw_completes_with_identical_transcripts() {
    for scheme in [Scheme::Ed25519, Scheme::EcdsaP256] {
        let run = run_draw(parties_with(scheme, &[Strategy::Honest; 3]), 10, &schedule(1)).unwrap();
        let result = run.result().expect("completed");
        assert!(result < 10);
        assert!(run.honest_transcripts_agree());
        assert_eq!(run.honest().count(), 3);
        for p in &run.parties {
            assert_eq!(p.outcome.result(), Some(result));
            assert_eq!(p.transcript.structures.len(), 7);
        }
    }
}

#[test]
fn bound_one_always_yields_zero() {
    for s in 0..5 {
        assert_eq!(run_draw(honest(4), 1, &schedule(s)).unwrap().result(), Some(0));
    }
}

#[test]
fn identical_inputs_reproduce_bit_for_bit() {
    let mut sched = schedule(9);
    sched.latency = Latency::Uniform { min: 1, max: 50 };
    let a = run_draw(honest(4), 17, &sched).unwrap();
    let b = run_draw(honest(4), 17, &sched).unwrap();
    assert_eq!(fingerprint(&a), fingerprint(&b));
    let c = run_draw(honest(4), 17, &schedule(10)).unwrap();
    assert_ne!(fingerprint(&a), fingerprint(&c));
}

#[test]
fn registers_advance_together_across_draws() {
    let mut sim = Simulation::new(honest(3)).unwrap();
    let mut results = Vec::new();
    for d in 1..=5 {
        let run = sim.run_draw(6, &schedule(d)).unwrap();
        assert_eq!(run.draw_no, d);
        results.push(run.result().unwrap());
    }
    let regs = sim.registers().unwrap();
    assert!(regs.iter().all(|r| r == &regs[0]));
    assert_eq!(regs[0].next_draw_number(), 6);
}

#[test]
fn staller_at_commit_step_aborts_without_reveals() {
    let run = run_draw(
        parties(&[Strategy::Honest, Strategy::Honest, Strategy::Staller { stop_at_step: 9 }]),
        10,
        &schedule(2),
    )
    .unwrap();
    let abort = run.abort().expect("aborted");
    assert_eq!(abort.cause, AbortCause::MissingPeer);
    assert_eq!(abort.phase, 9);
    assert_eq!(abort.culprit, None);
    assert!(run.trace.iter().all(|e| e.step() < 12));
    assert!(run.duration_ms >= fairdraw::protocol::DEFAULT_TIMEOUT_MS);
}

#[test]
fn staller_after_commit_is_named() {
    let run = run_draw(
        parties(&[Strategy::Honest, Strategy::Honest, Strategy::Staller { stop_at_step: 13 }]),
        10,
        &schedule(3),
    )
    .unwrap();
    let abort = run.abort().expect("aborted");
    assert_eq!(abort.cause, AbortCause::MissingPeer);
    assert_eq!(abort.phase, 13);
    assert_eq!(abort.culprit.as_deref(), Some("g2"));
}

#[test]
fn replayer_announce_from_previous_draw_is_rejected() {
    let mut sim = Simulation::new(parties(&[
        Strategy::Honest,
        Strategy::Honest,
        Strategy::Replayer {
            kind: StructureTag::DrawAnnounce,
        },
    ]))
    .unwrap();
    let first = sim.run_draw(10, &schedule(4)).unwrap();
    assert!(first.result().is_some());
    let second = sim.run_draw(10, &schedule(5)).unwrap();
    let abort = second.abort().expect("aborted");
    assert_eq!(abort.cause, AbortCause::BadDrawNo);
    assert_eq!(abort.culprit.as_deref(), Some("g2"));
    assert_eq!(second.draw_no, 2);
}

#[test]
fn replaying_any_recorded_structure_into_the_next_draw_aborts() {
    let kinds = [
        (StructureTag::DrawAnnounce, 0),
        (StructureTag::CounterSignedAnnounce, 2),
        (StructureTag::AnnounceAggregate, 0),
        (StructureTag::InitiatorCommit, 0),
        (StructureTag::CountersignedCommit, 2),
        (StructureTag::CommitAggregate, 0),
        (StructureTag::GuarantorCommit, 2),
        (StructureTag::GuarantorHashAggregate, 0),
        (StructureTag::CountersignedHashAggregate, 2),
        (StructureTag::InitiatorReveal, 0),
        (StructureTag::GuarantorReveal, 2),
        (StructureTag::RevealAggregate, 0),
    ];
    for (kind, from) in kinds {
        for to in [0, 1] {
            let mut sim = Simulation::new(honest(3)).unwrap();
            sim.run_draw(5, &schedule(6)).unwrap();
            let fault = Fault::new(
                FaultTrigger::AtTime(0),
                FaultAction::Replay(ReplayRef {
                    draw_no: 1,
                    kind,
                    from,
                }),
            )
            .to(to);
            let run = sim.run_draw(5, &schedule(7).with_fault(fault)).unwrap();
            let abort = run.abort().unwrap_or_else(|| panic!("{kind} to {to} accepted"));
            assert_eq!(abort.cause, AbortCause::BadDrawNo, "{kind} to {to}");
        }
    }
}

#[test]
fn replay_of_unknown_message_is_a_configuration_error() {
    let fault = Fault::new(
        FaultTrigger::AtStep(1),
        FaultAction::Replay(ReplayRef {
            draw_no: 7,
            kind: StructureTag::DrawAnnounce,
            from: 0,
        }),
    );
    let err = run_draw(honest(3), 5, &schedule(1).with_fault(fault)).unwrap_err();
    assert!(matches!(err, SimError::ReplayNotFound { draw_no: 7, .. }));
}

#[test]
fn renege_is_caught_and_attributed() {
    let run = run_draw(
        parties(&[Strategy::Honest, Strategy::Renege, Strategy::Honest]),
        10,
        &schedule(8),
    )
    .unwrap();
    let abort = run.abort().expect("aborted");
    assert_eq!(abort.cause, AbortCause::BadHash);
    assert_eq!(abort.culprit.as_deref(), Some("g1"));

    let run = run_draw(
        parties(&[Strategy::Renege, Strategy::Honest, Strategy::Honest]),
        10,
        &schedule(8),
    )
    .unwrap();
    let abort = run.abort().expect("aborted");
    assert_eq!(abort.cause, AbortCause::BadHash);
    assert_eq!(abort.culprit.as_deref(), Some("i"));
}

#[test]
fn adaptive_reveal_never_forces_a_target() {
    for target in 0..3 {
        for s in 0..10 {
            let run = run_draw(
                parties(&[
                    Strategy::Honest,
                    Strategy::Honest,
                    Strategy::AdaptiveReveal { target },
                ]),
                3,
                &schedule(100 + s),
            )
            .unwrap();
            let abort = run.abort().expect("forced result accepted");
            assert_eq!(abort.cause, AbortCause::BadHash);
            assert_eq!(abort.culprit.as_deref(), Some("g2"));
        }
    }
}

#[test]
fn coalition_against_one_honest_guarantor_always_aborts_with_culprit() {
    let k = 5;
    for target in 0..k {
        let run = run_draw(
            parties(&[
                Strategy::Constant(0),
                Strategy::Honest,
                Strategy::AdaptiveReveal { target },
                Strategy::AdaptiveReveal { target },
            ]),
            k,
            &schedule(200 + target),
        )
        .unwrap();
        assert_eq!(run.honest().count(), 1);
        let abort = run.abort().expect("forced result accepted");
        assert_eq!(abort.cause, AbortCause::BadHash);
        assert_eq!(abort.culprit.as_deref(), Some("g2"));
    }
}

#[test]
fn waiting_but_complying_guarantor_completes() {
    let run = run_draw(
        parties(&[Strategy::Honest, Strategy::WaitsButComplies, Strategy::Honest]),
        10,
        &schedule(9),
    )
    .unwrap();
    assert!(run.result().is_some());
    let reveal_times: Vec<(usize, u64)> = run
        .trace
        .iter()
        .filter(|e| e.kind == Some(StructureTag::GuarantorReveal))
        .map(|e| (e.from, e.sent_at))
        .collect();
    let honest_at = reveal_times.iter().find(|r| r.0 == 2).unwrap().1;
    let waiting_at = reveal_times.iter().find(|r| r.0 == 1).unwrap().1;
    assert!(waiting_at >= honest_at);
}

#[test]
fn tampering_with_any_step_in_flight_never_completes() {
    let steps = [1, 2, 3, 5, 6, 7, 9, 10, 11, 12, 13, 14];
    for step in steps {
        for idx in [0usize, 1, 5, 9, 20, 33, 64, 90, 128, 200, 500, 4096] {
            let fault = Fault::new(FaultTrigger::AtStep(step), FaultAction::Tamper(idx));
            let run = run_draw(honest(3), 10, &schedule(11).with_fault(fault)).unwrap();
            assert!(
                run.trace.iter().any(|e| e.fault.is_some()),
                "fault at step {step} never fired"
            );
            assert!(run.abort().is_some(), "tamper at step {step} byte {idx} accepted");
        }
    }
}

#[test]
fn duplicates_and_delays_are_tolerated() {
    for step in [1, 2, 3, 5, 6, 7, 9, 10, 11, 12, 13, 14] {
        let dup = Fault::new(FaultTrigger::AtStep(step), FaultAction::Duplicate);
        let run = run_draw(honest(3), 10, &schedule(12).with_fault(dup)).unwrap();
        assert!(run.result().is_some(), "duplicate at step {step}");
        let delay = Fault::new(FaultTrigger::AtStep(step), FaultAction::Delay(500));
        let run = run_draw(honest(3), 10, &schedule(12).with_fault(delay)).unwrap();
        assert!(run.result().is_some(), "delay at step {step}");
    }
}

#[test]
fn dropped_reveal_times_out_with_culprit() {
    let drop = Fault::new(FaultTrigger::AtStep(13), FaultAction::Drop).to(0);
    let run = run_draw(honest(3), 10, &schedule(13).with_fault(drop)).unwrap();
    let abort = run.abort().expect("aborted");
    assert_eq!(abort.cause, AbortCause::MissingPeer);
    assert_eq!(abort.phase, 13);
    assert!(abort.culprit.is_some());
}

#[test]
fn invalid_strategy_role_is_rejected() {
    let err = Simulation::new(parties(&[
        Strategy::WaitsButComplies,
        Strategy::Honest,
    ]))
    .unwrap_err();
    assert!(matches!(err, SimError::StrategyRole { .. }));
}

#[test]
fn coalition_experiments_separate_fair_from_rigged() {
    let identity_guarantors = parties(&[Strategy::Honest, Strategy::Constant(0), Strategy::Constant(0)]);
    let fair = coalition_bias_experiment(identity_guarantors, 3, 3000, &schedule(14)).unwrap();
    assert_eq!(fair.completed(), 3000);
    assert!(fair.chi_square.as_ref().unwrap().pass, "{:?}", fair.chi_square);

    let honest_guarantor = parties(&[Strategy::Constant(0), Strategy::Honest, Strategy::Constant(0)]);
    let fair = coalition_bias_experiment(honest_guarantor, 3, 3000, &schedule(15)).unwrap();
    assert!(fair.chi_square.as_ref().unwrap().pass, "{:?}", fair.chi_square);

    let rigged = parties(&[Strategy::Constant(1), Strategy::Constant(0), Strategy::Constant(2)]);
    let rigged = coalition_bias_experiment(rigged, 3, 3000, &schedule(16)).unwrap();
    let report = rigged.chi_square.unwrap();
    assert!(!report.pass);
    assert_eq!(report.bins.iter().filter(|&&c| c > 0).count(), 1);
}

#[test]
fn scenario_file_drives_a_simulation() {
    let text = "seed 42\nk 6\ndraws 2\ninitiator alice\nguarantor bob\nguarantor carol renege\n";
    let sc = Scenario::parse(text).unwrap();
    let mut sim = Simulation::new(sc.party_specs()).unwrap();
    for d in 1..=sc.draws {
        let run = sim.run_draw(sc.k, &sc.schedule(d)).unwrap();
        assert_eq!(run.abort().unwrap().culprit.as_deref(), Some("carol"));
    }
}

#[test]
fn print_threat_coverage_table() {
    let table = coverage_table();
    println!("{table}");
    for threat in [
        "renege on a committed value",
        "dictionary attack on hidden values",
        "refusal to participate",
        "replay of earlier traffic",
    ] {
        assert!(THREAT_COVERAGE.iter().any(|(_, t)| *t == threat));
        assert!(table.contains(threat));
    }
}
