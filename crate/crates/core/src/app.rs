//! The 2oo2 workload: two replicas periodically send a measurement, the
//! voter compares seq-matched pairs and ACKs every message back.
//!
//! This module holds the protocol state machines and latency bookkeeping;
//! [`crate::system`] drives them on the simulated platform.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{SimTime, NS_PER_MS};

/// Lower edge of the acceptable voting response band (reported only).
pub const RESPONSE_BAND_LOW_MS: u64 = 350;
/// A voter decision passes when it takes at most this long.
pub const RESPONSE_BOUND_MS: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement {
    pub replica: usize,
    pub seq: u32,
    pub value: i64,
    pub sent_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoteOutcome {
    Match,
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoteRecord {
    pub seq: u32,
    pub values: (i64, i64),
    pub outcome: VoteOutcome,
    pub decided_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SampleKind {
    ReplicaRoundTrip,
    VoterDecision,
}

impl SampleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleKind::ReplicaRoundTrip => "ReplicaRoundTrip",
            SampleKind::VoterDecision => "VoterDecision",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ReplicaRoundTrip" => Some(SampleKind::ReplicaRoundTrip),
            "VoterDecision" => Some(SampleKind::VoterDecision),
            _ => None,
        }
    }
}

impl fmt::Display for SampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencySample {
    pub kind: SampleKind,
    /// VM that observed the sample (a replica VM or the voter VM).
    pub vm: String,
    pub seq: u32,
    pub latency_us: f64,
}

/// Costs of moving a message through the privileged VM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModel {
    /// Execution demand on a pVM vCPU per message hop.
    pub backend_cost_us: f64,
    /// Fixed transfer time after the backend hands a message on.
    pub wire_delay_us: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            backend_cost_us: 50.0,
            wire_delay_us: 10.0,
        }
    }
}

impl ChannelModel {
    pub fn check(&self) -> Result<(), String> {
        if self.backend_cost_us >= 0.0 && self.wire_delay_us >= 0.0 {
            Ok(())
        } else {
            Err("channel costs must be non-negative".into())
        }
    }
}

/// A replica that stops sending after `after` measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailStop {
    pub replica: usize,
    pub after: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppParams {
    /// Measurements each replica sends per run.
    pub samples: u32,
    pub p_mismatch: f64,
    pub period_us: u64,
    /// Each round starts at a random offset in `[0, phase_spread_us)` within
    /// its period, shared by both replicas.
    pub phase_spread_us: u64,
    /// Extra per-replica release offset, uniform in `[0, release_jitter_us)`.
    pub release_jitter_us: f64,
    pub produce_us: f64,
    pub voter_us: f64,
    pub ack_us: f64,
    /// Relative demand spread: each job costs `cost * U(1 - j, 1 + j)`.
    pub demand_jitter: f64,
    pub fail_stop: Option<FailStop>,
}

impl Default for AppParams {
    fn default() -> Self {
        AppParams {
            samples: 35,
            p_mismatch: 0.0,
            period_us: 100_000,
            phase_spread_us: 10_000,
            release_jitter_us: 50.0,
            produce_us: 30.0,
            voter_us: 40.0,
            ack_us: 20.0,
            demand_jitter: 0.3,
            fail_stop: None,
        }
    }
}

impl AppParams {
    pub fn check(&self) -> Result<(), String> {
        if self.samples < 2 {
            return Err(format!("samples must be at least 2, got {}", self.samples));
        }
        if !(0.0..=1.0).contains(&self.p_mismatch) {
            return Err(format!("p_mismatch {} outside [0, 1]", self.p_mismatch));
        }
        if self.period_us == 0 {
            return Err("period_us must be positive".into());
        }
        if self.phase_spread_us > self.period_us {
            return Err("phase_spread_us exceeds period_us".into());
        }
        let costs = [self.release_jitter_us, self.produce_us, self.voter_us, self.ack_us];
        if costs.iter().any(|c| !(*c >= 0.0)) {
            return Err("costs and jitter must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.demand_jitter) {
            return Err(format!("demand_jitter {} outside [0, 1)", self.demand_jitter));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("replica {replica} sent seq {seq} twice")]
    DuplicateSeq { replica: usize, seq: u32 },
    #[error("replica {replica} got an ACK for unknown seq {seq}")]
    UnknownSeq { replica: usize, seq: u32 },
    #[error("replica {replica} sent seq {seq} after seq {last}")]
    NonIncreasingSeq { replica: usize, seq: u32, last: u32 },
}

/// Sender side of one replica.
#[derive(Debug, Clone, Default)]
pub struct ReplicaState {
    pub replica: usize,
    pub vm: String,
    outstanding: BTreeMap<u32, SimTime>,
    last_seq: Option<u32>,
    pub sent: u32,
}

impl ReplicaState {
    pub fn new(replica: usize, vm: &str) -> Self {
        ReplicaState {
            replica,
            vm: vm.to_string(),
            ..Default::default()
        }
    }

    /// Records a measurement leaving the replica.
    pub fn replica_step(&mut self, seq: u32, value: i64, sent_at: SimTime) -> Result<Measurement, ProtocolError> {
        if let Some(last) = self.last_seq {
            if seq <= last {
                return Err(ProtocolError::NonIncreasingSeq {
                    replica: self.replica,
                    seq,
                    last,
                });
            }
        }
        self.last_seq = Some(seq);
        self.outstanding.insert(seq, sent_at);
        self.sent += 1;
        Ok(Measurement {
            replica: self.replica,
            seq,
            value,
            sent_at,
        })
    }

    pub fn replica_on_ack(&mut self, seq: u32, now: SimTime) -> Result<LatencySample, ProtocolError> {
        let sent_at = self.outstanding.remove(&seq).ok_or(ProtocolError::UnknownSeq {
            replica: self.replica,
            seq,
        })?;
        Ok(LatencySample {
            kind: SampleKind::ReplicaRoundTrip,
            vm: self.vm.clone(),
            seq,
            latency_us: now.since(sent_at) as f64 / 1000.0,
        })
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding.len()
    }
}

/// The naive voter: compares seq-matched pairs, never alerts the replicas.
#[derive(Debug, Clone, Default)]
pub struct VoterState {
    pub vm: String,
    /// seq -> (value, arrival) per replica.
    pending: BTreeMap<u32, [Option<(i64, SimTime)>; 2]>,
    seen: BTreeSet<(usize, u32)>,
    pub records: Vec<VoteRecord>,
    pub delivered: [u32; 2],
}

impl VoterState {
    pub fn new(vm: &str) -> Self {
        VoterState {
            vm: vm.to_string(),
            ..Default::default()
        }
    }

    /// Processes a measurement that reached the voter at `arrival`, with
    /// the comparison completing at `now`.
    pub fn voter_on_receive(
        &mut self,
        m: &Measurement,
        arrival: SimTime,
        now: SimTime,
    ) -> Result<Option<(VoteRecord, LatencySample)>, ProtocolError> {
        if !self.seen.insert((m.replica, m.seq)) {
            return Err(ProtocolError::DuplicateSeq {
                replica: m.replica,
                seq: m.seq,
            });
        }
        self.delivered[m.replica.min(1)] += 1;
        let slot = self.pending.entry(m.seq).or_default();
        slot[m.replica.min(1)] = Some((m.value, arrival));
        let [Some((v0, a0)), Some((v1, a1))] = *slot else {
            return Ok(None);
        };
        self.pending.remove(&m.seq);
        let outcome = if v0 == v1 { VoteOutcome::Match } else { VoteOutcome::Mismatch };
        let record = VoteRecord {
            seq: m.seq,
            values: (v0, v1),
            outcome,
            decided_at: now,
        };
        self.records.push(record);
        let first = a0.min(a1);
        let sample = LatencySample {
            kind: SampleKind::VoterDecision,
            vm: self.vm.clone(),
            seq: m.seq,
            latency_us: now.since(first) as f64 / 1000.0,
        };
        Ok(Some((record, sample)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCheck {
    pub per_sample: Vec<bool>,
    pub pass: bool,
    /// Set when there was nothing to check.
    pub warning: Option<String>,
}

/// Flags each voter decision against the response bound.
pub fn check_response_requirement(latencies_us: &[f64]) -> ResponseCheck {
    let bound = (RESPONSE_BOUND_MS * NS_PER_MS) as f64 / 1000.0;
    let per_sample: Vec<bool> = latencies_us.iter().map(|&l| l <= bound).collect();
    let warning = latencies_us
        .is_empty()
        .then(|| "no voter samples; response check passes vacuously".to_string());
    ResponseCheck {
        pass: per_sample.iter().all(|&p| p),
        per_sample,
        warning,
    }
}

/// The band text printed next to the check.
pub fn response_band() -> String {
    format!("[{RESPONSE_BAND_LOW_MS} ms, {RESPONSE_BOUND_MS} ms]")
}
