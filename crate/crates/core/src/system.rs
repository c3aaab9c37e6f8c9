//! Full-platform simulation of one campaign cell.
//!
//! Every vCPU hosts a guest scheduler with the tasks pinned to it:
//!
//! - replica VMs run the replica task on their first vCPU;
//! - each pVM vCPU runs a backend task that forwards messages;
//! - each voter vCPU runs a voter task;
//! - each stress vCPU runs an always-runnable hog.
//!
//! Replica `r` routes its traffic through pVM vCPU `r` and is served by voter
//! vCPU `r` (modulo the vCPU counts). A round trip is: release, produce on the
//! replica, forward on the pVM, wire, compare on the voter, forward the ACK
//! on the pVM, wire, handle the ACK on the replica. Jobs are demand servers:
//! a running job drains its demand at the contention rate of its pCPU.
//!
//! A vCPU is runnable exactly when its guest has a runnable task. All
//! randomness except the stress phases is keyed by sequence number, so the
//! runs with and without the stress VM see the same releases, values and
//! demands.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::app::{
    AppParams, ChannelModel, LatencySample, Measurement, ProtocolError, ReplicaState, SampleKind,
    VoteRecord, VoterState,
};
use crate::guest::{GuestError, GuestScheduler, TaskState};
use crate::platform::{validate_platform, PlatformError, PlatformSpec, VmRole};
use crate::rtds::{Grant, Rtds, RtdsError, Segment};
use crate::sim::{ContentionModel, EventKind, EventQueue, RngStream, SimError, Trace};
use crate::time::{us, SimTime};

const EPS: f64 = 1e-6;
const GUEST_TIMER_BASE: usize = 1 << 20;
/// Slack after the last release before an unfinished run is an error.
const DRAIN_SLACK_US: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub platform: PlatformSpec,
    pub extra_slice_us: u64,
    pub rr_timeslice_us: u64,
    pub channel: ChannelModel,
    pub contention: ContentionModel,
    pub app: AppParams,
}

impl SystemConfig {
    /// The PoC platform with default RTDS, channel, contention and app
    /// settings and no stress VM.
    pub fn poc() -> Self {
        SystemConfig {
            platform: crate::platform::poc_platform(),
            extra_slice_us: crate::rtds::DEFAULT_EXTRA_SLICE_US,
            rr_timeslice_us: crate::guest::DEFAULT_RR_TIMESLICE / 1000,
            channel: ChannelModel::default(),
            contention: ContentionModel::default(),
            app: AppParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub keep_trace: bool,
    pub keep_segments: bool,
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("invalid platform: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Platform(Vec<PlatformError>),
    #[error("unsupported layout: {0}")]
    Layout(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Rtds(#[from] RtdsError),
    #[error(transparent)]
    Guest(#[from] GuestError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("run did not finish by {0}")]
    Incomplete(SimTime),
}

/// Backend processing of one message hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopRecord {
    pub replica: usize,
    pub seq: u32,
    pub ack: bool,
    pub start: SimTime,
    pub end: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundTrip {
    pub replica: usize,
    pub seq: u32,
    pub sent_at: SimTime,
    pub acked_at: SimTime,
}

#[derive(Debug, Clone)]
pub struct SystemRun {
    /// Sorted by (vm, kind, seq).
    pub samples: Vec<LatencySample>,
    pub votes: Vec<VoteRecord>,
    /// Measurements that reached the voter, per replica.
    pub delivered: [u32; 2],
    pub hops: Vec<HopRecord>,
    pub round_trips: Vec<RoundTrip>,
    pub segments: Vec<Segment>,
    pub grants: Vec<Grant>,
    pub vcpu_count: usize,
    pub trace: Trace,
    pub events: u64,
    pub end: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Replica(usize),
    Backend,
    Voter,
    Stress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JobKind {
    Produce { seq: u32 },
    Forward { msg: usize },
    Vote { msg: usize },
    HandleAck { msg: usize },
    Hog,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    kind: JobKind,
    demand: f64,
    started: Option<SimTime>,
}

#[derive(Debug, Clone)]
struct Task {
    name: String,
    vm: usize,
    vcpu: usize,
    local: usize,
    kind: TaskKind,
    jobs: VecDeque<Job>,
    left: f64,
}

#[derive(Debug, Clone, Copy)]
struct Msg {
    m: Measurement,
    ack: bool,
    arrival: SimTime,
}

/// Static task placement of a platform: `(vm, task, vcpu id, kind)`.
pub fn task_layout(platform: &PlatformSpec) -> Result<Vec<(String, String, String, TaskKind)>, SystemError> {
    let replicas: Vec<usize> = vm_indices(platform, VmRole::Replica);
    if replicas.len() != 2 {
        return Err(SystemError::Layout(format!(
            "a 2oo2 run needs exactly 2 replica VMs, found {}",
            replicas.len()
        )));
    }
    for role in [VmRole::Privileged, VmRole::Voter] {
        let n = vm_indices(platform, role).len();
        if n != 1 {
            return Err(SystemError::Layout(format!("need exactly one {role:?} VM, found {n}")));
        }
    }
    let mut out = Vec::new();
    for vm in &platform.vms {
        for (k, v) in vm.vcpus.iter().enumerate() {
            let (name, kind) = match vm.role {
                VmRole::Replica => {
                    if k > 0 {
                        continue;
                    }
                    let r = replicas.iter().position(|&i| platform.vms[i].name == vm.name).unwrap();
                    (format!("{}.app", vm.name), TaskKind::Replica(r))
                }
                VmRole::Privileged => (format!("{}.backend{k}", vm.name), TaskKind::Backend),
                VmRole::Voter => (format!("{}.vote{k}", vm.name), TaskKind::Voter),
                VmRole::Stress => (format!("{}.hog{k}", vm.name), TaskKind::Stress),
            };
            out.push((vm.name.clone(), name, v.id.clone(), kind));
        }
    }
    Ok(out)
}

fn vm_indices(platform: &PlatformSpec, role: VmRole) -> Vec<usize> {
    platform
        .vms
        .iter()
        .enumerate()
        .filter(|(_, vm)| vm.role == role)
        .map(|(i, _)| i)
        .collect()
}

fn demand_key(code: u64, replica: usize, seq: u32) -> u64 {
    (code << 40) ^ ((replica as u64) << 32) ^ seq as u64
}

struct Sim<'a> {
    cfg: &'a SystemConfig,
    seed: u64,
    rtds: Rtds,
    guests: Vec<GuestScheduler>,
    tasks: Vec<Task>,
    /// guest-local task id -> global task id, per vCPU
    task_of: Vec<Vec<usize>>,
    stress_vcpu: Vec<bool>,
    replica_task: [usize; 2],
    backend_for: [usize; 2],
    voter_for: [usize; 2],
    replicas: [ReplicaState; 2],
    release_at: BTreeMap<(usize, u32), SimTime>,
    voter: VoterState,
    msgs: Vec<Msg>,
    values: BTreeMap<u32, (i64, i64)>,
    queue: EventQueue,
    armed: BTreeMap<EventKind, SimTime>,
    rates: Vec<f64>,
    last: SimTime,
    samples: Vec<LatencySample>,
    hops: Vec<HopRecord>,
    round_trips: Vec<RoundTrip>,
    expected_round_trips: usize,
    trace: Trace,
}

impl<'a> Sim<'a> {
    fn build(cfg: &'a SystemConfig, seed: u64, opts: RunOptions) -> Result<Self, SystemError> {
        let platform = validate_platform(cfg.platform.clone()).map_err(SystemError::Platform)?;
        cfg.app.check().map_err(SystemError::Params)?;
        cfg.channel.check().map_err(SystemError::Params)?;
        if !(cfg.contention.kappa >= 0.0) {
            return Err(SystemError::Params("kappa must be non-negative".into()));
        }
        let layout = task_layout(&platform)?;
        let mut rtds = Rtds::from_platform(&platform, us(cfg.extra_slice_us))?;
        rtds.keep_segments(opts.keep_segments);

        let n_vcpus = rtds.vcpu_count();
        let mut guests: Vec<GuestScheduler> =
            (0..n_vcpus).map(|_| GuestScheduler::new(us(cfg.rr_timeslice_us))).collect();
        let mut task_of = vec![Vec::new(); n_vcpus];
        let mut stress_vcpu = vec![false; n_vcpus];
        let mut tasks = Vec::new();
        for (vm_name, name, vcpu_id, kind) in layout {
            let vm = platform.vms.iter().position(|v| v.name == vm_name).unwrap();
            let vcpu = rtds.index_of(&vcpu_id).unwrap();
            let local = guests[vcpu].add_task(&name, platform.vms[vm].guest_policy)?;
            task_of[vcpu].push(tasks.len());
            stress_vcpu[vcpu] = kind == TaskKind::Stress;
            tasks.push(Task {
                name,
                vm,
                vcpu,
                local,
                kind,
                jobs: VecDeque::new(),
                left: 0.0,
            });
        }
        let of_kind = |k: TaskKind| -> Vec<usize> {
            tasks.iter().enumerate().filter(|(_, t)| t.kind == k).map(|(i, _)| i).collect()
        };
        let backends = of_kind(TaskKind::Backend);
        let voters = of_kind(TaskKind::Voter);
        let replica_task = [of_kind(TaskKind::Replica(0))[0], of_kind(TaskKind::Replica(1))[0]];
        let pick = |list: &[usize], r: usize| list[r % list.len()];
        let replica_vm = |r: usize| platform.vms[tasks[replica_task[r]].vm].name.clone();
        let voter_vm = platform.vms[tasks[voters[0]].vm].name.clone();

        let mut sim = Sim {
            cfg,
            seed,
            rtds,
            guests,
            task_of,
            stress_vcpu,
            replica_task,
            backend_for: [pick(&backends, 0), pick(&backends, 1)],
            voter_for: [pick(&voters, 0), pick(&voters, 1)],
            replicas: [ReplicaState::new(0, &replica_vm(0)), ReplicaState::new(1, &replica_vm(1))],
            release_at: BTreeMap::new(),
            voter: VoterState::new(&voter_vm),
            msgs: Vec::new(),
            values: BTreeMap::new(),
            queue: EventQueue::new(),
            armed: BTreeMap::new(),
            rates: vec![1.0; platform.pcpu_count],
            last: SimTime::ZERO,
            samples: Vec::new(),
            hops: Vec::new(),
            round_trips: Vec::new(),
            expected_round_trips: 0,
            trace: Trace::new(opts.keep_trace),
            tasks,
        };
        sim.plan_releases()?;
        sim.plan_stress()?;
        Ok(sim)
    }

    fn plan_releases(&mut self) -> Result<(), SystemError> {
        let app = &self.cfg.app;
        for seq in 0..app.samples {
            let mut phase = RngStream::keyed(self.seed, "release", seq as u64);
            let base = us(app.period_us) * seq as u64 + (phase.uniform(0.0, app.phase_spread_us as f64) * 1000.0) as u64;
            let mut values = RngStream::keyed(self.seed, "measurement", seq as u64);
            let v0 = values.range_inclusive(0, 9_999) as i64;
            let v1 = if values.bernoulli(app.p_mismatch) {
                v0 + 1 + values.range_inclusive(0, 9) as i64
            } else {
                v0
            };
            self.values.insert(seq, (v0, v1));
            for r in 0..2 {
                if let Some(fs) = app.fail_stop {
                    if fs.replica == r && seq >= fs.after {
                        continue;
                    }
                }
                let mut jitter = RngStream::keyed(self.seed, "release-jitter", demand_key(0, r, seq));
                let at = SimTime::from_ns(base + (jitter.uniform(0.0, app.release_jitter_us) * 1000.0) as u64);
                self.queue.schedule(at, EventKind::SampleDue { replica: r, seq })?;
                self.expected_round_trips += 1;
            }
        }
        Ok(())
    }

    fn plan_stress(&mut self) -> Result<(), SystemError> {
        for (i, task) in self.tasks.iter().enumerate() {
            if task.kind != TaskKind::Stress {
                continue;
            }
            let period = self.rtds.vcpu(task.vcpu).params.period_us as f64;
            let mut rng = RngStream::keyed(self.seed, "stress", task.vcpu as u64);
            let at = SimTime::from_ns((rng.uniform(0.0, period) * 1000.0) as u64);
            self.queue.schedule(at, EventKind::TaskReady { task: i })?;
        }
        Ok(())
    }

    fn demand(&self, code: u64, replica: usize, seq: u32, cost_us: f64) -> f64 {
        let j = self.cfg.app.demand_jitter;
        let mut rng = RngStream::keyed(self.seed, "demand", demand_key(code, replica, seq));
        cost_us * 1000.0 * rng.uniform(1.0 - j, 1.0 + j)
    }

    fn push_job(&mut self, task: usize, kind: JobKind, demand: f64) {
        let t = &mut self.tasks[task];
        if t.jobs.is_empty() {
            t.left = demand;
        }
        t.jobs.push_back(Job {
            kind,
            demand,
            started: None,
        });
    }

    /// Drains demand and charges budgets up to `now`.
    fn account(&mut self, now: SimTime) {
        let elapsed = now.since(self.last);
        if elapsed > 0 {
            for p in 0..self.rates.len() {
                let Some(v) = self.rtds.running(p) else { continue };
                let Some(local) = self.guests[v].current() else { continue };
                let task = self.task_of[v][local];
                if !self.tasks[task].jobs.is_empty() {
                    self.tasks[task].left -= elapsed as f64 * self.rates[p];
                }
                self.guests[v].consume(local, elapsed);
            }
        }
        self.last = now;
        self.rtds.advance(now);
        for g in &mut self.guests {
            g.advance(now);
        }
    }

    fn complete(&mut self, task: usize, now: SimTime) -> Result<(), SystemError> {
        let job = self.tasks[task].jobs.pop_front().expect("completing an empty task");
        self.tasks[task].left = self.tasks[task].jobs.front().map_or(0.0, |j| j.demand);
        self.trace.record(format!("{},-,done,task={},{:?}", now.as_ns(), self.tasks[task].name, job.kind));
        let app = &self.cfg.app;
        let wire = (self.cfg.channel.wire_delay_us * 1000.0).round() as u64;
        match job.kind {
            JobKind::Produce { seq } => {
                let TaskKind::Replica(r) = self.tasks[task].kind else { unreachable!() };
                let (v0, v1) = self.values[&seq];
                let value = if r == 0 { v0 } else { v1 };
                let sent_at = self.release_at[&(r, seq)];
                let m = self.replicas[r].replica_step(seq, value, sent_at)?;
                self.msgs.push(Msg {
                    m,
                    ack: false,
                    arrival: SimTime::ZERO,
                });
                let d = self.demand(1, r, seq, self.cfg.channel.backend_cost_us);
                self.push_job(self.backend_for[r], JobKind::Forward { msg: self.msgs.len() - 1 }, d);
            }
            JobKind::Forward { msg } => {
                let Msg { m, ack, .. } = self.msgs[msg];
                self.hops.push(HopRecord {
                    replica: m.replica,
                    seq: m.seq,
                    ack,
                    start: job.started.unwrap_or(now),
                    end: now,
                });
                self.queue.schedule(now + wire, EventKind::MessageDeliver { msg })?;
            }
            JobKind::Vote { msg } => {
                let Msg { m, arrival, .. } = self.msgs[msg];
                if let Some((_, sample)) = self.voter.voter_on_receive(&m, arrival, now)? {
                    self.samples.push(sample);
                }
                self.msgs.push(Msg {
                    m,
                    ack: true,
                    arrival: SimTime::ZERO,
                });
                let d = self.demand(3, m.replica, m.seq, self.cfg.channel.backend_cost_us);
                self.push_job(self.backend_for[m.replica], JobKind::Forward { msg: self.msgs.len() - 1 }, d);
            }
            JobKind::HandleAck { msg } => {
                let m = self.msgs[msg].m;
                let sample = self.replicas[m.replica].replica_on_ack(m.seq, now)?;
                self.samples.push(sample);
                self.round_trips.push(RoundTrip {
                    replica: m.replica,
                    seq: m.seq,
                    sent_at: m.sent_at,
                    acked_at: now,
                });
            }
            JobKind::Hog => {}
        }
        let _ = app;
        Ok(())
    }

    fn on_event(&mut self, ev: EventKind, now: SimTime) -> Result<(), SystemError> {
        let app = &self.cfg.app;
        match ev {
            EventKind::SampleDue { replica, seq } => {
                self.release_at.insert((replica, seq), now);
                let d = self.demand(0, replica, seq, app.produce_us);
                self.push_job(self.replica_task[replica], JobKind::Produce { seq }, d);
            }
            EventKind::MessageDeliver { msg } => {
                let Msg { m, ack, .. } = self.msgs[msg];
                if ack {
                    let d = self.demand(4, m.replica, m.seq, app.ack_us);
                    self.push_job(self.replica_task[m.replica], JobKind::HandleAck { msg }, d);
                } else {
                    self.msgs[msg].arrival = now;
                    let d = self.demand(2, m.replica, m.seq, app.voter_us);
                    self.push_job(self.voter_for[m.replica], JobKind::Vote { msg }, d);
                }
            }
            EventKind::TaskReady { task } => self.push_job(task, JobKind::Hog, f64::INFINITY),
            kind => {
                if self.armed.get(&kind) == Some(&now) {
                    self.armed.remove(&kind);
                }
            }
        }
        Ok(())
    }

    /// Brings guests and vCPUs in line with the pending work and runs
    /// zero-demand jobs until nothing changes.
    fn settle(&mut self, now: SimTime) -> Result<(), SystemError> {
        for _ in 0..10_000 {
            for t in 0..self.tasks.len() {
                let Task { vcpu, local, .. } = self.tasks[t];
                let state = self.guests[vcpu].task(local).state;
                let busy = !self.tasks[t].jobs.is_empty();
                if busy && state == TaskState::Blocked {
                    self.guests[vcpu].wake(local, now)?;
                } else if !busy && state != TaskState::Blocked {
                    self.guests[vcpu].block(local)?;
                }
            }
            for v in 0..self.guests.len() {
                let want = self.guests[v].has_runnable();
                let is = self.rtds.vcpu(v).runnable;
                if want && !is {
                    self.rtds.vcpu_wake(v, now)?;
                } else if !want && is {
                    self.rtds.vcpu_block(v, now)?;
                }
            }
            self.rtds.reschedule(now);
            let mut finished = Vec::new();
            for v in 0..self.guests.len() {
                if self.rtds.vcpu(v).running_on.is_none() {
                    self.guests[v].park();
                    continue;
                }
                let Some(local) = self.guests[v].dispatch() else { continue };
                let task = self.task_of[v][local];
                if let Some(job) = self.tasks[task].jobs.front_mut() {
                    job.started.get_or_insert(now);
                    if self.tasks[task].left <= EPS {
                        finished.push(task);
                    }
                }
            }
            if finished.is_empty() {
                return Ok(());
            }
            for task in finished {
                self.complete(task, now)?;
            }
        }
        Err(SystemError::Sim(SimError::Model("no fixed point while settling".into())))
    }

    fn arm(&mut self, at: SimTime, kind: EventKind) -> Result<(), SimError> {
        if self.armed.get(&kind) != Some(&at) {
            self.armed.insert(kind, at);
            self.queue.schedule(at, kind)?;
        }
        Ok(())
    }

    fn arm_timers(&mut self, now: SimTime) -> Result<(), SystemError> {
        let npcpu = self.rates.len();
        let stress_running: Vec<bool> = (0..npcpu)
            .map(|p| self.rtds.running(p).is_some_and(|v| self.stress_vcpu[v]))
            .collect();
        let total = stress_running.iter().filter(|&&s| s).count();
        for p in 0..npcpu {
            let others = total - usize::from(stress_running[p]);
            self.rates[p] = self.cfg.contention.effective_rate(others);
        }
        for (t, kind) in self.rtds.next_timers(now) {
            self.arm(t, kind)?;
        }
        for p in 0..npcpu {
            let Some(v) = self.rtds.running(p) else { continue };
            let Some(local) = self.guests[v].current() else { continue };
            let task = self.task_of[v][local];
            let left = self.tasks[task].left;
            if !self.tasks[task].jobs.is_empty() && left.is_finite() {
                let dt = (left.max(0.0) / self.rates[p]).ceil().max(1.0) as u64;
                self.arm(now + dt, EventKind::TaskComplete { task })?;
            }
        }
        for v in 0..self.guests.len() {
            if let Some(t) = self.guests[v].next_timer(now) {
                self.arm(t, EventKind::TimerFire { timer: GUEST_TIMER_BASE + v })?;
            }
        }
        Ok(())
    }

    fn finished(&self) -> bool {
        self.round_trips.len() == self.expected_round_trips
    }

    fn run(mut self) -> Result<SystemRun, SystemError> {
        let app = &self.cfg.app;
        let horizon = SimTime::from_us(app.period_us * app.samples as u64 + DRAIN_SLACK_US);
        while !self.finished() {
            let Some((now, batch)) = self.queue.pop_batch(horizon) else {
                return Err(SystemError::Incomplete(horizon));
            };
            self.account(now);
            let done: Vec<usize> = (0..self.tasks.len())
                .filter(|&t| !self.tasks[t].jobs.is_empty() && self.tasks[t].left <= EPS)
                .collect();
            for t in done {
                self.complete(t, now)?;
            }
            for ev in &batch {
                self.trace.record(format!("{},{},{}", ev.time.as_ns(), ev.seq, ev.kind));
                self.on_event(ev.kind, now)?;
            }
            self.settle(now)?;
            for (t, rec) in self.rtds.take_records() {
                self.trace.record(format!("{},-,{}", t.as_ns(), rec.describe()));
            }
            self.arm_timers(now)?;
        }
        let end = self.queue.now();
        self.rtds.advance(end);
        let mut samples = self.samples;
        samples.sort_by(|a, b| (&a.vm, a.kind, a.seq).cmp(&(&b.vm, b.kind, b.seq)));
        Ok(SystemRun {
            samples,
            votes: self.voter.records.clone(),
            delivered: self.voter.delivered,
            hops: self.hops,
            round_trips: self.round_trips,
            segments: self.rtds.segments().to_vec(),
            grants: self.rtds.grants().to_vec(),
            vcpu_count: self.rtds.vcpu_count(),
            trace: self.trace,
            events: self.queue.dispatched(),
            end,
        })
    }
}

/// Runs one cell to completion.
pub fn simulate(cfg: &SystemConfig, seed: u64, opts: RunOptions) -> Result<SystemRun, SystemError> {
    Sim::build(cfg, seed, opts)?.run()
}

impl SystemRun {
    pub fn latencies(&self, kind: SampleKind) -> Vec<f64> {
        self.samples.iter().filter(|s| s.kind == kind).map(|s| s.latency_us).collect()
    }
}
