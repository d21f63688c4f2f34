use std::thread;

use crate::crypto::EntropySource;
use crate::protocol::Abort;
use crate::stats::ChiSquareReport;

use super::{PartySpec, RunStatus, SimError, SimSchedule, Simulation};

/// Independent simulations the trials are split across. Fixed so the
/// outcome does not depend on the number of cores.
const SHARDS: u64 = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    /// Completed draws per result value.
    pub bins: Vec<u64>,
    pub aborted_runs: u64,
    /// `None` when `k` has no tabulated critical value (k = 1 or k > 101).
    pub chi_square: Option<ChiSquareReport>,
    /// One abort seen during the experiment, if any.
    pub sample_abort: Option<Abort>,
}

impl ExperimentReport {
    pub fn completed(&self) -> u64 {
        self.bins.iter().sum()
    }
}

struct ShardResult {
    bins: Vec<u64>,
    aborted: u64,
    sample_abort: Option<Abort>,
}

fn run_shard(
    parties: Vec<PartySpec>,
    k: u64,
    target: u64,
    template: &SimSchedule,
    shard: u64,
) -> Result<ShardResult, SimError> {
    let mut sim = Simulation::new(parties)?.without_registers();
    let mut out = ShardResult {
        bins: vec![0; k as usize],
        aborted: 0,
        sample_abort: None,
    };
    let mut completed = 0;
    let mut draw = 0u64;
    while completed < target && out.aborted < target {
        draw += 1;
        let mut schedule = template.clone();
        schedule.seed = EntropySource::derive_seed(
            &template.seed,
            &[b"shard", &shard.to_be_bytes(), &draw.to_be_bytes()],
        );
        match sim.run_draw(k, &schedule)?.status {
            RunStatus::Completed(r) => {
                out.bins[r as usize] += 1;
                completed += 1;
            }
            RunStatus::Aborted(a) => {
                out.aborted += 1;
                out.sample_abort.get_or_insert(a);
            }
        }
    }
    Ok(out)
}

/// Runs draws until `trials` of them complete, tallying results and aborts
/// separately, and tests the result histogram for uniformity. Stops early if
/// as many draws abort as were requested to complete. Shards run in
/// parallel.
pub fn coalition_bias_experiment(
    parties: Vec<PartySpec>,
    k: u64,
    trials: u64,
    schedule: &SimSchedule,
) -> Result<ExperimentReport, SimError> {
    crate::protocol::check_bound(k)?;
    let workers = thread::available_parallelism().map_or(1, |n| n.get() as u64);
    let shards: Vec<(u64, u64)> = (0..SHARDS)
        .map(|s| (s, trials / SHARDS + u64::from(s < trials % SHARDS)))
        .filter(|&(_, t)| t > 0)
        .collect();
    let results: Vec<Result<ShardResult, SimError>> = thread::scope(|scope| {
        let chunks: Vec<_> = shards
            .chunks(shards.len().div_ceil(workers as usize).max(1))
            .map(|chunk| {
                let parties = &parties;
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|&(s, t)| run_shard(parties.clone(), k, t, schedule, s))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        chunks
            .into_iter()
            .flat_map(|h| h.join().expect("experiment worker panicked"))
            .collect()
    });

    let mut bins = vec![0u64; k as usize];
    let mut aborted_runs = 0;
    let mut sample_abort = None;
    for r in results {
        let r = r?;
        for (b, c) in bins.iter_mut().zip(&r.bins) {
            *b += c;
        }
        aborted_runs += r.aborted;
        if sample_abort.is_none() {
            sample_abort = r.sample_abort;
        }
    }
    Ok(ExperimentReport {
        chi_square: ChiSquareReport::new(bins.clone(), aborted_runs),
        bins,
        aborted_runs,
        sample_abort,
    })
}
