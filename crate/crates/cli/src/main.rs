//! `fairdraw`: key generation, simulated draws, transcript verification,
//! adversary scenarios and uniformity statistics.
//!
//! Exit codes: 0 success, 1 verification or statistics failure, 2 usage
//! error, 3 internal error, 4 the draw aborted.

mod roster_file;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use fairdraw::crypto::{EntropySource, KeyPair, Scheme};
use fairdraw::protocol::Abort;
use fairdraw::register::{verify_transcript_bytes, RegisterStore, Verdict};
use fairdraw::simnet::{
    coalition_bias_experiment, parse_seed, PartySpec, RunOutcome, RunStatus, Scenario,
    Simulation, Strategy,
};

use roster_file::RosterFile;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fairdraw", version, about = "Verifiable multi-party random draws")]
struct Cli {
    /// Emit one JSON record per line instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a signing key pair as `<out>.pub` and `<out>.sec`.
    Keygen {
        #[arg(long, default_value = "ed25519")]
        scheme: String,
        #[arg(long)]
        out: PathBuf,
        /// Derive the key from this seed instead of system entropy.
        #[arg(long)]
        seed: Option<String>,
    },
    /// Run one all-honest simulated draw and record every party's transcript.
    Run {
        #[arg(long)]
        roster: PathBuf,
        #[arg(long)]
        k: u64,
        /// Draw seed; the `FAIRDRAW_SEED` environment variable takes precedence.
        #[arg(long)]
        seed: Option<String>,
        /// One register directory per participant is kept below this.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Check a transcript file against a roster.
    Verify {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        roster: PathBuf,
    },
    /// Run the draws described by a scenario file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Write keys, a roster file and every transcript below this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run a scenario repeatedly and test the results for uniformity.
    Stats {
        #[arg(long)]
        scenario: PathBuf,
        /// Completed draws to collect; defaults to the scenario's `trials`.
        #[arg(long)]
        trials: Option<u64>,
    },
}

/// Result of a command: lines to print and the exit code.
struct Report {
    code: u8,
    text: Vec<String>,
    records: Vec<Value>,
}

impl Report {
    fn new(code: u8) -> Self {
        Self {
            code,
            text: Vec::new(),
            records: Vec::new(),
        }
    }

    fn emit(&self, json: bool) {
        if json {
            for r in &self.records {
                println!("{r}");
            }
        } else {
            for l in &self.text {
                println!("{l}");
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Keygen { scheme, out, seed } => keygen(&scheme, &out, seed.as_deref()),
        Command::Run {
            roster,
            k,
            seed,
            out_dir,
        } => run(&roster, k, seed.as_deref(), &out_dir),
        Command::Verify { transcript, roster } => verify(&transcript, &roster),
        Command::Simulate { scenario, out_dir } => simulate(&scenario, out_dir.as_deref()),
        Command::Stats { scenario, trials } => stats(&scenario, trials),
    };
    match outcome {
        Ok(report) => {
            report.emit(cli.json);
            ExitCode::from(report.code)
        }
        Err(e) => {
            if cli.json {
                println!("{}", json!({ "error": e.to_string(), "code": e.exit_code() }));
            }
            eprintln!("fairdraw: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn seed_arg(seed: Option<&str>) -> Result<[u8; 32], CliError> {
    match seed {
        Some(s) => parse_seed(s).ok_or_else(|| CliError::Usage(format!("malformed seed `{s}`"))),
        None => {
            let mut seed = [0u8; 32];
            EntropySource::system().fill(&mut seed);
            Ok(seed)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::internal(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
}

fn read_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read scenario {}: {e}", path.display())))?;
    Scenario::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn abort_json(a: &Abort) -> Value {
    json!({
        "phase": a.phase,
        "cause": a.cause.name(),
        "culprit": a.culprit,
        "reported_by": a.reported_by,
    })
}

fn keygen(scheme: &str, out: &Path, seed: Option<&str>) -> Result<Report, CliError> {
    let scheme = Scheme::parse(scheme).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut src = match seed {
        Some(_) => EntropySource::seeded(seed_arg(seed)?),
        None => EntropySource::system(),
    };
    let key = KeyPair::generate(scheme, &mut src);
    let public_file = out.with_extension("pub");
    let secret_file = out.with_extension("sec");
    write_file(&public_file, &key.public_key().to_file_bytes())?;
    write_file(&secret_file, &key.to_file_bytes())?;
    let public_hex = hex::encode(key.public_key().to_bytes());
    let mut report = Report::new(0);
    report.text.push(format!("{scheme} public key {public_hex}"));
    report.text.push(format!("wrote {} and {}", public_file.display(), secret_file.display()));
    report.records.push(json!({
        "command": "keygen",
        "scheme": scheme.name(),
        "public_key": public_hex,
        "public_file": public_file,
        "secret_file": secret_file,
    }));
    Ok(report)
}

fn run(roster_path: &Path, k: u64, seed: Option<&str>, out_dir: &Path) -> Result<Report, CliError> {
    let file = RosterFile::load(roster_path)?;
    let roster = file.roster()?;
    let keys = file.key_pairs()?;
    let env_seed = std::env::var("FAIRDRAW_SEED").ok().filter(|s| !s.is_empty());
    let given = env_seed.as_deref().or(seed);
    let seed = seed_arg(given)?;
    if k == 0 {
        return Err(CliError::Usage("k must be at least 1".into()));
    }
    let specs: Vec<PartySpec> = file
        .entries
        .iter()
        .zip(keys)
        .map(|(e, key)| PartySpec {
            name: e.name.clone(),
            role: e.role,
            strategy: Strategy::Honest,
            key,
        })
        .collect();

    let mut stores = file
        .entries
        .iter()
        .map(|e| RegisterStore::open(out_dir.join(&e.name)).map_err(CliError::internal))
        .collect::<Result<Vec<_>, _>>()?;
    let draw_no = stores[0].next_draw_number();
    if let Some(s) = stores.iter().find(|s| s.next_draw_number() != draw_no) {
        return Err(CliError::Internal(format!(
            "register {} expects draw {}, others expect {draw_no}",
            s.dir().display(),
            s.next_draw_number()
        )));
    }
    let registers = stores.iter().map(|s| s.register().clone()).collect();
    let mut sim = Simulation::new(specs)
        .and_then(|s| s.with_registers(registers))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut schedule = fairdraw::simnet::SimSchedule::new(seed);
    schedule.seed = EntropySource::derive_seed(&seed, &[b"run", &draw_no.to_be_bytes()]);
    let outcome = sim.run_draw(k, &schedule).map_err(CliError::internal)?;

    let mut files = Vec::new();
    for (store, party) in stores.iter_mut().zip(&outcome.parties) {
        store.record(&party.transcript, &roster).map_err(CliError::internal)?;
        files.push(store.transcript_path(outcome.draw_no).expect("just recorded"));
    }
    let mut report = match &outcome.status {
        RunStatus::Completed(result) => {
            let mut r = Report::new(0);
            r.text.push(format!("draw {} result {result}", outcome.draw_no));
            r.records.push(json!({
                "command": "run",
                "draw_no": outcome.draw_no,
                "k": k,
                "status": "completed",
                "result": result,
                "transcripts": files,
            }));
            r
        }
        RunStatus::Aborted(a) => {
            let mut r = Report::new(4);
            r.text.push(format!("draw {} {a}", outcome.draw_no));
            r.records.push(json!({
                "command": "run",
                "draw_no": outcome.draw_no,
                "k": k,
                "status": "aborted",
                "abort": abort_json(a),
                "transcripts": files,
            }));
            r
        }
    };
    if given.is_none() {
        report.text.push(format!("seed 0x{}", hex::encode(seed)));
        report.records[0]["seed"] = json!(hex::encode(seed));
    }
    report
        .text
        .extend(files.iter().map(|f| format!("transcript {}", f.display())));
    Ok(report)
}

fn verify(transcript: &Path, roster_path: &Path) -> Result<Report, CliError> {
    let bytes = fs::read(transcript)
        .map_err(|e| CliError::Usage(format!("cannot read transcript {}: {e}", transcript.display())))?;
    let roster = RosterFile::load(roster_path)?.roster()?;
    let verdict = verify_transcript_bytes(&bytes, &roster);
    let mut report = Report::new(if verdict.is_valid() { 0 } else { 1 });
    report.text.push(verdict.to_string());
    report.records.push(match &verdict {
        Verdict::Valid { result } => json!({ "command": "verify", "valid": true, "result": result }),
        Verdict::Invalid {
            step,
            cause,
            culprit,
        } => json!({
            "command": "verify",
            "valid": false,
            "step": step,
            "cause": cause.name(),
            "culprit": culprit,
        }),
    });
    Ok(report)
}

fn write_scenario_artifacts(dir: &Path, specs: &[PartySpec]) -> Result<(), CliError> {
    let mut roster = String::new();
    for p in specs {
        write_file(&dir.join(format!("{}.pub", p.name)), &p.key.public_key().to_file_bytes())?;
        roster.push_str(&format!("{} {} {}.pub\n", p.role.name(), p.name, p.name));
    }
    write_file(&dir.join("roster.txt"), roster.as_bytes())
}

fn draw_line(run: &RunOutcome) -> String {
    match &run.status {
        RunStatus::Completed(r) => format!("draw {}: result {r}", run.draw_no),
        RunStatus::Aborted(a) => format!("draw {}: {a}", run.draw_no),
    }
}

fn simulate(path: &Path, out_dir: Option<&Path>) -> Result<Report, CliError> {
    let scenario = read_scenario(path)?;
    let specs = scenario.party_specs();
    let mut sim = Simulation::new(specs.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(dir) = out_dir {
        write_scenario_artifacts(dir, &specs)?;
    }
    let mut report = Report::new(0);
    for d in 1..=scenario.draws {
        let run = sim
            .run_draw(scenario.k, &scenario.schedule(d))
            .map_err(|e| CliError::Usage(e.to_string()))?;
        report.text.push(draw_line(&run));
        let mut record = json!({
            "command": "simulate",
            "draw_no": run.draw_no,
            "duration_ms": run.duration_ms,
            "messages": run.trace.len(),
        });
        match &run.status {
            RunStatus::Completed(r) => {
                record["status"] = json!("completed");
                record["result"] = json!(r);
            }
            RunStatus::Aborted(a) => {
                record["status"] = json!("aborted");
                record["abort"] = abort_json(a);
            }
        }
        report.records.push(record);
        if let Some(dir) = out_dir {
            for p in &run.parties {
                let file = dir
                    .join(&p.name)
                    .join(fairdraw::register::transcript_file_name(run.draw_no));
                write_file(&file, &p.transcript.to_bytes())?;
            }
        }
    }
    Ok(report)
}

fn stats(path: &Path, trials: Option<u64>) -> Result<Report, CliError> {
    let scenario = read_scenario(path)?;
    let trials = trials
        .or(scenario.trials)
        .ok_or_else(|| CliError::Usage("no trial count given (use --trials or a `trials` line)".into()))?;
    let k = scenario.k;
    if k < 2 {
        return Err(CliError::Usage("statistics need k of at least 2".into()));
    }
    let minimum = k.saturating_mul(10);
    if trials < minimum {
        return Err(CliError::Usage(format!(
            "{trials} trials is under-powered for k={k}; at least {minimum} are needed"
        )));
    }
    let experiment = coalition_bias_experiment(scenario.party_specs(), k, trials, &scenario.schedule(1))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let Some(chi) = &experiment.chi_square else {
        return Err(CliError::Usage(format!("no tabulated critical value for k={k}")));
    };
    let mut report = Report::new(if chi.pass { 0 } else { 1 });
    report.text.push(chi.to_string());
    if experiment.completed() < trials {
        report.text.push(format!(
            "stopped after {} aborted draws with {} of {trials} completed",
            experiment.aborted_runs,
            experiment.completed()
        ));
        report.code = 1;
    }
    report.records.push(json!({
        "command": "stats",
        "k": k,
        "trials": trials,
        "completed": experiment.completed(),
        "bins": chi.bins,
        "statistic": chi.statistic,
        "degrees_of_freedom": chi.degrees_of_freedom,
        "threshold": chi.threshold,
        "pass": chi.pass && experiment.completed() == trials,
        "aborted_runs": experiment.aborted_runs,
    }));
    Ok(report)
}
