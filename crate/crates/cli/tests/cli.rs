//! End-to-end runs of the `fairdraw` binary: exit codes, stdout and the
//! files each subcommand leaves behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fairdraw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairdraw"))
        .current_dir(dir)
        .env_remove("FAIRDRAW_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Keys for `i`, `g1`, `g2` and a roster listing them, with secret key
/// files for every party except those in `without_secret`.
fn setup(without_secret: &[&str]) -> TempDir {
    let dir = TempDir::new().unwrap();
    let mut roster = String::new();
    for (n, name) in ["i", "g1", "g2"].iter().enumerate() {
        let seed = (n + 1).to_string();
        let out = fairdraw(dir.path(), &["keygen", "--out", &format!("keys/{name}"), "--seed", &seed]);
        assert_eq!(code(&out), 0, "{out:?}");
        let role = if n == 0 { "initiator" } else { "guarantor" };
        roster.push_str(&format!("{role} {name} keys/{name}.pub"));
        if !without_secret.contains(name) {
            roster.push_str(&format!(" keys/{name}.sec"));
        }
        roster.push('\n');
    }
    fs::write(dir.path().join("roster.txt"), roster).unwrap();
    dir
}

fn run_json(dir: &Path, k: &str, seed: &str, out_dir: &str) -> (i32, Value) {
    let out = fairdraw(
        dir,
        &["--json", "run", "--roster", "roster.txt", "--k", k, "--seed", seed, "--out-dir", out_dir],
    );
    let record = serde_json::from_str(stdout(&out).trim()).expect("one json record");
    (code(&out), record)
}

fn transcripts(record: &Value) -> Vec<PathBuf> {
    record["transcripts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| PathBuf::from(p.as_str().unwrap()))
        .collect()
}

#[test]
fn keygen_writes_both_halves_for_each_scheme() {
    let dir = TempDir::new().unwrap();
    for scheme in ["ed25519", "ecdsa-p256"] {
        let out = fairdraw(dir.path(), &["--json", "keygen", "--scheme", scheme, "--out", scheme]);
        assert_eq!(code(&out), 0);
        let rec: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
        assert_eq!(rec["scheme"], scheme);
        assert!(dir.path().join(format!("{scheme}.pub")).exists());
        assert!(dir.path().join(format!("{scheme}.sec")).exists());
    }
    let out = fairdraw(dir.path(), &["keygen", "--scheme", "rot13", "--out", "x"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn seeded_keygen_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = fairdraw(dir.path(), &["keygen", "--out", "a", "--seed", "0x42"]);
    let b = fairdraw(dir.path(), &["keygen", "--out", "b", "--seed", "0x42"]);
    assert_eq!(stdout(&a).lines().next(), stdout(&b).lines().next());
    assert_eq!(
        fs::read(dir.path().join("a.sec")).unwrap(),
        fs::read(dir.path().join("b.sec")).unwrap()
    );
}

#[test]
fn run_with_k_one_prints_zero() {
    let dir = setup(&[]);
    let out = fairdraw(
        dir.path(),
        &["run", "--roster", "roster.txt", "--k", "1", "--seed", "3", "--out-dir", "reg"],
    );
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("draw 1 result 0\n"), "{}", stdout(&out));
}

#[test]
fn run_is_deterministic_for_a_fixed_seed() {
    let dir = setup(&[]);
    let (c1, r1) = run_json(dir.path(), "10", "77", "a");
    let (c2, r2) = run_json(dir.path(), "10", "77", "b");
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(r1["result"], r2["result"]);
    for (x, y) in transcripts(&r1).iter().zip(transcripts(&r2)) {
        assert_eq!(fs::read(dir.path().join(x)).unwrap(), fs::read(dir.path().join(y)).unwrap());
    }
}

#[test]
fn seed_environment_variable_overrides_the_flag() {
    let dir = setup(&[]);
    let run = |seed_flag: &str, env: &str, out_dir: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_fairdraw"))
            .current_dir(dir.path())
            .env("FAIRDRAW_SEED", env)
            .args(["--json", "run", "--roster", "roster.txt", "--k", "1000", "--seed", seed_flag])
            .args(["--out-dir", out_dir])
            .output()
            .unwrap();
        serde_json::from_str::<Value>(stdout(&out).trim()).unwrap()
    };
    let a = run("1", "99", "a");
    let b = run("2", "99", "b");
    let (_, plain) = run_json(dir.path(), "1000", "99", "c");
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["result"], plain["result"]);
}

#[test]
fn unseeded_run_reports_its_seed() {
    let dir = setup(&[]);
    let out = fairdraw(dir.path(), &["run", "--roster", "roster.txt", "--k", "5", "--out-dir", "reg"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).lines().any(|l| l.starts_with("seed 0x")), "{}", stdout(&out));
}

#[test]
fn registers_number_consecutive_runs() {
    let dir = setup(&[]);
    for expected in 1..=3 {
        let (c, r) = run_json(dir.path(), "6", &expected.to_string(), "reg");
        assert_eq!(c, 0);
        assert_eq!(r["draw_no"], expected);
    }
    for party in ["i", "g1", "g2"] {
        assert!(dir.path().join("reg").join(party).join("draw-000003.fdrw").exists());
    }
}

#[test]
fn missing_secret_key_is_a_usage_error_and_writes_nothing() {
    let dir = setup(&["g2"]);
    let out = fairdraw(
        dir.path(),
        &["run", "--roster", "roster.txt", "--k", "10", "--seed", "1", "--out-dir", "reg"],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("g2"));
    assert!(!dir.path().join("reg").exists());
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = setup(&[]);
    for args in [
        &["run", "--roster", "roster.txt", "--k", "0", "--seed", "1", "--out-dir", "r"][..],
        &["run", "--roster", "nope.txt", "--k", "3", "--seed", "1", "--out-dir", "r"],
        &["run", "--roster", "roster.txt", "--k", "3", "--seed", "xyz", "--out-dir", "r"],
        &["run", "--roster", "roster.txt", "--k", "ten", "--out-dir", "r"],
        &["frobnicate"],
    ] {
        let out = fairdraw(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}");
    }
}

#[test]
fn run_output_verifies_with_the_printed_result() {
    let dir = setup(&[]);
    let (c, r) = run_json(dir.path(), "10", "12", "reg");
    assert_eq!(c, 0);
    for t in transcripts(&r) {
        let out = fairdraw(
            dir.path(),
            &["--json", "verify", "--transcript", t.to_str().unwrap(), "--roster", "roster.txt"],
        );
        assert_eq!(code(&out), 0);
        let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
        assert_eq!(v["valid"], true);
        assert_eq!(v["result"], r["result"]);
    }
    let text = fairdraw(
        dir.path(),
        &["verify", "--transcript", transcripts(&r)[0].to_str().unwrap(), "--roster", "roster.txt"],
    );
    assert!(stdout(&text).starts_with("valid"), "{}", stdout(&text));
}

#[test]
fn truncated_transcript_is_a_decode_error() {
    let dir = setup(&[]);
    let (_, r) = run_json(dir.path(), "10", "13", "reg");
    let bytes = fs::read(dir.path().join(&transcripts(&r)[0])).unwrap();
    fs::write(dir.path().join("short.fdrw"), &bytes[..bytes.len() / 2]).unwrap();
    let out = fairdraw(
        dir.path(),
        &["--json", "verify", "--transcript", "short.fdrw", "--roster", "roster.txt"],
    );
    assert_eq!(code(&out), 1);
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["valid"], false);
    assert_eq!(v["cause"], "decode-error");
}

#[test]
fn unreadable_transcript_is_a_usage_error() {
    let dir = setup(&[]);
    let out = fairdraw(dir.path(), &["verify", "--transcript", "absent", "--roster", "roster.txt"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn transcript_from_another_roster_is_invalid() {
    let dir = setup(&[]);
    let (_, r) = run_json(dir.path(), "10", "14", "reg");
    let swapped = fs::read_to_string(dir.path().join("roster.txt"))
        .unwrap()
        .replace("keys/g1.pub", "keys/TMP")
        .replace("keys/g2.pub", "keys/g1.pub")
        .replace("keys/TMP", "keys/g2.pub");
    fs::write(dir.path().join("swapped.txt"), swapped).unwrap();
    let out = fairdraw(
        dir.path(),
        &["verify", "--transcript", transcripts(&r)[0].to_str().unwrap(), "--roster", "swapped.txt"],
    );
    assert_eq!(code(&out), 1);
}

const RENEGE: &str = "seed 5\nk 10\ndraws 2\ninitiator i\nguarantor g1\nguarantor g2 renege\n";

#[test]
fn substituted_reveal_is_pinned_on_the_guarantor() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.txt"), RENEGE).unwrap();
    let out = fairdraw(dir.path(), &["simulate", "--scenario", "s.txt", "--out-dir", "out"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("draw 1: abort at step 13: bad-hash (culprit g2)"));
    let out = fairdraw(
        dir.path(),
        &["--json", "verify", "--transcript", "out/i/draw-000001.fdrw", "--roster", "out/roster.txt"],
    );
    assert_eq!(code(&out), 1);
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["cause"], "bad-hash");
    assert_eq!(v["culprit"], "g2");
}

#[test]
fn simulate_reports_every_draw() {
    let dir = TempDir::new().unwrap();
    let scenario = "seed 8\nk 6\ndraws 3\nscheme ecdsa-p256\ninitiator i\nguarantor g1\nguarantor g2 staller 11\nfault at-step 3 duplicate\n";
    fs::write(dir.path().join("s.txt"), scenario).unwrap();
    let out = fairdraw(dir.path(), &["--json", "simulate", "--scenario", "s.txt"]);
    assert_eq!(code(&out), 0);
    let records: Vec<Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    for (n, r) in records.iter().enumerate() {
        assert_eq!(r["draw_no"], n as u64 + 1);
        assert_eq!(r["status"], "aborted");
        assert_eq!(r["abort"]["cause"], "missing-peer");
        assert_eq!(r["abort"]["phase"], 11);
    }

    fs::write(dir.path().join("h.txt"), "seed 8\nk 6\ndraws 2\ninitiator i\nguarantor g1\n").unwrap();
    let a = fairdraw(dir.path(), &["simulate", "--scenario", "h.txt"]);
    let b = fairdraw(dir.path(), &["simulate", "--scenario", "h.txt"]);
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).lines().all(|l| l.contains(": result ")), "{}", stdout(&a));
}

#[test]
fn malformed_scenario_is_a_usage_error_with_its_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.txt"), "seed 1\nk 3\nguarantor bob sulk\n").unwrap();
    let out = fairdraw(dir.path(), &["simulate", "--scenario", "s.txt"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{out:?}");
}

fn stats(dir: &Path, scenario: &str, trials: Option<&str>) -> (i32, Option<Value>, String) {
    fs::write(dir.join("stats.txt"), scenario).unwrap();
    let mut args = vec!["--json", "stats", "--scenario", "stats.txt"];
    if let Some(t) = trials {
        args.extend(["--trials", t]);
    }
    let out = fairdraw(dir, &args);
    let rec = stdout(&out).lines().next().and_then(|l| serde_json::from_str(l).ok());
    (code(&out), rec, String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn stats_passes_for_honest_parties() {
    let dir = TempDir::new().unwrap();
    let (c, rec, _) = stats(dir.path(), "seed 21\nk 4\ninitiator i\nguarantor g1\nguarantor g2\n", Some("4000"));
    let rec = rec.unwrap();
    assert_eq!(c, 0, "{rec}");
    assert_eq!(rec["pass"], true);
    assert_eq!(rec["completed"], 4000);
    assert_eq!(rec["degrees_of_freedom"], 3);

    let text = fairdraw(dir.path(), &["stats", "--scenario", "stats.txt", "--trials", "400"]);
    assert!(stdout(&text).contains("chi-square"), "{}", stdout(&text));
}

#[test]
fn stats_takes_trials_from_the_scenario() {
    let dir = TempDir::new().unwrap();
    let (c, rec, _) = stats(dir.path(), "seed 22\nk 3\ntrials 300\ninitiator i\nguarantor g1\n", None);
    assert_eq!(c, 0);
    assert_eq!(rec.unwrap()["trials"], 300);
}

#[test]
fn stats_negative_control_fails() {
    let dir = TempDir::new().unwrap();
    let scenario = "seed 23\nk 3\ninitiator i constant 1\nguarantor g1 constant 2\nguarantor g2 constant 0\n";
    let (c, rec, _) = stats(dir.path(), scenario, Some("300"));
    let rec = rec.unwrap();
    assert_eq!(c, 1);
    assert_eq!(rec["pass"], false);
    assert!(rec["statistic"].as_f64().unwrap() > rec["threshold"].as_f64().unwrap() * 10.0);
}

#[test]
fn stats_refuses_underpowered_runs() {
    let dir = TempDir::new().unwrap();
    let scenario = "seed 24\nk 10\ninitiator i\nguarantor g1\n";
    let (c, _, err) = stats(dir.path(), scenario, Some("99"));
    assert_eq!(c, 2);
    assert!(err.contains("at least 100"), "{err}");
    let (c, _, _) = stats(dir.path(), scenario, None);
    assert_eq!(c, 2);
    let (c, _, _) = stats(dir.path(), "seed 1\nk 1\ninitiator i\n", Some("100"));
    assert_eq!(c, 2);
}

#[test]
fn stats_stops_when_every_draw_aborts() {
    let dir = TempDir::new().unwrap();
    let scenario = "seed 25\nk 3\ninitiator i\nguarantor g1 renege\n";
    let (c, rec, _) = stats(dir.path(), scenario, Some("30"));
    let rec = rec.unwrap();
    assert_eq!(c, 1);
    assert_eq!(rec["completed"], 0);
    assert_eq!(rec["pass"], false);
}
