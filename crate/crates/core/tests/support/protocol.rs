//! Random small campaigns for the 2oo2 protocol invariants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use isolab_core::app::{FailStop, SampleKind, VoteOutcome};
use isolab_core::doe::{Arm, Campaign};
use isolab_core::system::{simulate, RunOptions, SystemConfig};

pub const LEVELS: [f64; 5] = [0.0, 0.05, 0.2, 0.5, 1.0];

fn random_config(rng: &mut ChaCha8Rng) -> (SystemConfig, usize) {
    let campaign = Campaign::poc(0, 1);
    let plan = campaign.plan().unwrap();
    let run = &plan.runs[rng.random_range(0..3)];
    let arm = if rng.random_bool(0.5) { Arm::With } else { Arm::Without };
    let mut cfg = campaign.cell_config(run, arm).unwrap();
    let p = rng.random_range(0..LEVELS.len());
    cfg.app.samples = rng.random_range(2..=12);
    cfg.app.p_mismatch = LEVELS[p];
    cfg.app.period_us = rng.random_range(20_000..=100_000);
    cfg.app.phase_spread_us = rng.random_range(0..=10_000);
    if rng.random_bool(0.2) {
        cfg.app.fail_stop = Some(FailStop {
            replica: rng.random_range(0..2),
            after: rng.random_range(0..cfg.app.samples),
        });
    }
    (cfg, p)
}

/// Runs `n` random campaigns and checks every protocol invariant. Returns a
/// short summary on success.
pub fn check_random_campaigns(n: u64, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = [0u64; LEVELS.len()];
    let mut mismatches = [0u64; LEVELS.len()];
    let mut fail_stops = 0;
    for i in 0..n {
        let (cfg, p) = random_config(&mut rng);
        let run = simulate(&cfg, i, RunOptions::default()).map_err(|e| format!("campaign {i}: {e}"))?;

        let min_delivered = run.delivered[0].min(run.delivered[1]) as usize;
        if run.votes.len() != min_delivered {
            return Err(format!("campaign {i}: {} votes, {min_delivered} pairs delivered", run.votes.len()));
        }
        let mut seqs: Vec<u32> = run.votes.iter().map(|v| v.seq).collect();
        seqs.sort();
        seqs.dedup();
        if seqs.len() != run.votes.len() {
            return Err(format!("campaign {i}: repeated vote seq"));
        }
        if let Some(v) = run.votes.iter().find(|v| (v.outcome == VoteOutcome::Match) != (v.values.0 == v.values.1)) {
            return Err(format!("campaign {i}: outcome {:?} for values {:?}", v.outcome, v.values));
        }
        pairs[p] += run.votes.len() as u64;
        mismatches[p] += run.votes.iter().filter(|v| v.outcome == VoteOutcome::Mismatch).count() as u64;
        fail_stops += usize::from(cfg.app.fail_stop.is_some());

        let sent: u32 = run.delivered.iter().sum();
        if run.latencies(SampleKind::ReplicaRoundTrip).len() as u32 != sent
            || run.latencies(SampleKind::VoterDecision).len() != run.votes.len()
        {
            return Err(format!("campaign {i}: sample counts do not match messages"));
        }
        if run.samples.iter().any(|s| !(s.latency_us >= 0.0)) {
            return Err(format!("campaign {i}: negative latency"));
        }
        // every round trip contains both backend hops of its message
        for rt in &run.round_trips {
            let hops: Vec<_> = run.hops.iter().filter(|h| h.replica == rt.replica && h.seq == rt.seq).collect();
            if hops.len() != 2 || hops.iter().any(|h| !(rt.sent_at <= h.start && h.start <= h.end && h.end <= rt.acked_at)) {
                return Err(format!("campaign {i}: hops {hops:?} outside round trip {rt:?}"));
            }
        }
    }
    if n >= 1000 && fail_stops < 100 {
        return Err(format!("only {fail_stops} fail-stop campaigns"));
    }
    let mut worst = 0.0f64;
    for (k, &p) in LEVELS.iter().enumerate() {
        let total = pairs[k] as f64;
        let rate = mismatches[k] as f64 / total;
        let bound = 3.0 * (p * (1.0 - p) / total).sqrt();
        if total == 0.0 || (rate - p).abs() > bound {
            return Err(format!("p={p}: rate {rate} over {total} pairs, 3 sigma = {bound}"));
        }
        if bound > 0.0 {
            worst = worst.max((rate - p).abs() / (bound / 3.0));
        }
    }
    Ok(format!("{n} campaigns, {} votes, worst deviation {worst:.2} sigma", pairs.iter().sum::<u64>()))
}
