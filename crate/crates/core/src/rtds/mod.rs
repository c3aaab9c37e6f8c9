//! RTDS hypervisor scheduler.
//!
//! Every vCPU is a deferrable server `(budget, period, extratime)`. Per pool
//! the scheduler keeps a global runqueue of runnable vCPUs with residual
//! budget, ordered by EDF (current deadline) or RM (period), and a depleted
//! queue of runnable vCPUs whose budget is gone. Depleted vCPUs with
//! `extratime` form a lower class that only runs on spare pCPUs, rotated
//! round-robin every `extra_slice`.
//!
//! The scheduler is passive: the owner calls [`Rtds::advance`] at every
//! decision point, applies wakes/blocks/parameter changes, then calls
//! [`Rtds::reschedule`] and arms a timer at [`Rtds::next_timers`]. Within a
//! decision point the order is: budget accounting, replenishment, extratime
//! class entry (by vCPU id), slice rotation, external changes, assignment.
//! Ties in the priority order go to the lower vCPU index.

mod driver;

pub use driver::{RtdsRun, RtdsSim, ScriptAction, ScriptEvent};

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::platform::{CpuPool, ParamsError, PlatformSpec, RtdsParams, SchedPolicy};
use crate::sim::EventKind;
use crate::time::{us, Nanos, SimTime};

/// Default extratime round-robin slice.
pub const DEFAULT_EXTRA_SLICE_US: u64 = 1_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RtdsError {
    #[error("unknown vCPU index {0}")]
    UnknownVcpu(usize),
    #[error("unknown pool index {0}")]
    UnknownPool(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(#[from] ParamsError),
    #[error("vCPU {vcpu} has no pCPU of pool {pool} in its affinity")]
    EmptyAffinity { vcpu: String, pool: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExecClass {
    Budgeted,
    Extra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcpuStatus {
    RunningOn(usize),
    Runnable,
    Depleted,
    Blocked,
}

/// Static description of one vCPU handed to the scheduler.
#[derive(Debug, Clone)]
pub struct VcpuConfig {
    pub name: String,
    pub pool: usize,
    pub params: RtdsParams,
    pub affinity: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct VcpuState {
    pub name: String,
    pub pool: usize,
    pub params: RtdsParams,
    /// Sorted pCPUs of the vCPU's pool it may run on.
    pub affinity: Vec<usize>,
    pub budget_left: Nanos,
    pub cur_deadline: SimTime,
    /// Whether the server has ever been started (first wake).
    pub activated: bool,
    pub runnable: bool,
    pub running_on: Option<usize>,
    pub class: ExecClass,
    extra_used: Nanos,
}

impl VcpuState {
    pub fn status(&self) -> VcpuStatus {
        if let Some(p) = self.running_on {
            VcpuStatus::RunningOn(p)
        } else if !self.runnable {
            VcpuStatus::Blocked
        } else if self.budget_left == 0 {
            VcpuStatus::Depleted
        } else {
            VcpuStatus::Runnable
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PoolQueues {
    /// Runnable vCPUs with residual budget, highest priority first.
    pub runqueue: Vec<usize>,
    /// Runnable vCPUs with no budget left, by index.
    pub depleted: Vec<usize>,
}

#[derive(Debug, Clone)]
struct PoolState {
    name: String,
    pcpus: Vec<usize>,
    policy: SchedPolicy,
    queues: PoolQueues,
    /// Round-robin order of depleted extratime vCPUs.
    extra: VecDeque<usize>,
}

/// A maximal interval during which `pcpu` ran `vcpu` in one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub pcpu: usize,
    pub vcpu: usize,
    pub class: ExecClass,
    pub start: SimTime,
    pub end: SimTime,
}

/// A budget grant: `budget` usable until `deadline`, starting at `at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub vcpu: usize,
    pub at: SimTime,
    pub budget: Nanos,
    pub deadline: SimTime,
}

/// Scheduler decisions, surfaced in the event trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedRecord {
    Pick { pcpu: usize, vcpu: usize, class: ExecClass },
    Preempt { pcpu: usize, vcpu: usize },
    Idle { pcpu: usize },
    Replenish { vcpu: usize, deadline: SimTime },
    Deplete { vcpu: usize },
}

impl SchedRecord {
    pub fn describe(&self) -> String {
        match *self {
            SchedRecord::Pick { pcpu, vcpu, class } => {
                format!("pick,pcpu={pcpu},vcpu={vcpu},class={class:?}")
            }
            SchedRecord::Preempt { pcpu, vcpu } => format!("preempt,pcpu={pcpu},vcpu={vcpu}"),
            SchedRecord::Idle { pcpu } => format!("idle,pcpu={pcpu}"),
            SchedRecord::Replenish { vcpu, deadline } => {
                format!("replenish,vcpu={vcpu},deadline={}", deadline.as_ns())
            }
            SchedRecord::Deplete { vcpu } => format!("deplete,vcpu={vcpu}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rtds {
    vcpus: Vec<VcpuState>,
    pools: Vec<PoolState>,
    current: Vec<Option<usize>>,
    last_update: SimTime,
    extra_slice: Nanos,
    keep_segments: bool,
    segments: Vec<Segment>,
    open_segment: Vec<Option<usize>>,
    grants: Vec<Grant>,
    records: Vec<(SimTime, SchedRecord)>,
}

impl Rtds {
    pub fn new(
        pcpu_count: usize,
        pools: &[CpuPool],
        vcpus: Vec<VcpuConfig>,
        extra_slice: Nanos,
    ) -> Result<Self, RtdsError> {
        let pool_states: Vec<PoolState> = pools
            .iter()
            .map(|p| PoolState {
                name: p.name.clone(),
                pcpus: p.pcpus.iter().copied().filter(|&c| c < pcpu_count).collect(),
                policy: p.policy,
                queues: PoolQueues::default(),
                extra: VecDeque::new(),
            })
            .collect();
        let mut states = Vec::with_capacity(vcpus.len());
        for cfg in vcpus {
            let pool = pool_states.get(cfg.pool).ok_or(RtdsError::UnknownPool(cfg.pool))?;
            cfg.params.check()?;
            let affinity: Vec<usize> = cfg
                .affinity
                .iter()
                .copied()
                .filter(|p| pool.pcpus.contains(p))
                .collect();
            if affinity.is_empty() {
                return Err(RtdsError::EmptyAffinity {
                    vcpu: cfg.name,
                    pool: pool.name.clone(),
                });
            }
            states.push(VcpuState {
                name: cfg.name,
                pool: cfg.pool,
                params: cfg.params,
                affinity,
                budget_left: cfg.params.budget_ns(),
                cur_deadline: SimTime::ZERO,
                activated: false,
                runnable: false,
                running_on: None,
                class: ExecClass::Budgeted,
                extra_used: 0,
            });
        }
        Ok(Rtds {
            vcpus: states,
            pools: pool_states,
            current: vec![None; pcpu_count],
            last_update: SimTime::ZERO,
            extra_slice: extra_slice.max(1),
            keep_segments: false,
            segments: Vec::new(),
            open_segment: vec![None; pcpu_count],
            grants: Vec::new(),
            records: Vec::new(),
        })
    }

    /// Builds the scheduler for every vCPU of `platform`, in VM order.
    pub fn from_platform(platform: &PlatformSpec, extra_slice: Nanos) -> Result<Self, RtdsError> {
        let mut vcpus = Vec::new();
        for vm in &platform.vms {
            let pool = platform
                .pools
                .iter()
                .position(|p| p.name == vm.pool)
                .ok_or(RtdsError::UnknownPool(usize::MAX))?;
            for v in &vm.vcpus {
                vcpus.push(VcpuConfig {
                    name: v.id.clone(),
                    pool,
                    params: v.params,
                    affinity: v.affinity.clone(),
                });
            }
        }
        Rtds::new(platform.pcpu_count, &platform.pools, vcpus, extra_slice)
    }

    /// Keep the full execution segment log (for audits and Gantt output).
    pub fn keep_segments(&mut self, keep: bool) {
        self.keep_segments = keep;
    }

    pub fn vcpu(&self, v: usize) -> &VcpuState {
        &self.vcpus[v]
    }

    pub fn vcpus(&self) -> &[VcpuState] {
        &self.vcpus
    }

    pub fn vcpu_count(&self) -> usize {
        self.vcpus.len()
    }

    pub fn pcpu_count(&self) -> usize {
        self.current.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vcpus.iter().position(|v| v.name == name)
    }

    /// vCPU currently assigned to `pcpu`.
    pub fn running(&self, pcpu: usize) -> Option<usize> {
        self.current.get(pcpu).copied().flatten()
    }

    pub fn queues(&self, pool: usize) -> &PoolQueues {
        &self.pools[pool].queues
    }

    pub fn policy(&self, pool: usize) -> SchedPolicy {
        self.pools[pool].policy
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn grants(&self) -> &[Grant] {
        &self.grants
    }

    pub fn take_records(&mut self) -> Vec<(SimTime, SchedRecord)> {
        std::mem::take(&mut self.records)
    }

    fn check(&self, v: usize) -> Result<(), RtdsError> {
        if v < self.vcpus.len() {
            Ok(())
        } else {
            Err(RtdsError::UnknownVcpu(v))
        }
    }

    fn priority_key(&self, v: usize) -> (u64, usize) {
        let st = &self.vcpus[v];
        match self.pools[st.pool].policy {
            SchedPolicy::EDF => (st.cur_deadline.as_ns(), v),
            SchedPolicy::RM => (st.params.period_ns(), v),
        }
    }

    fn push_extra(&mut self, v: usize) {
        let pool = self.vcpus[v].pool;
        if !self.pools[pool].extra.contains(&v) {
            self.pools[pool].extra.push_back(v);
        }
    }

    fn drop_extra(&mut self, v: usize) {
        let pool = self.vcpus[v].pool;
        self.pools[pool].extra.retain(|&x| x != v);
        self.vcpus[v].extra_used = 0;
    }

    fn grant(&mut self, v: usize, at: SimTime) {
        let st = &self.vcpus[v];
        self.grants.push(Grant {
            vcpu: v,
            at,
            budget: st.budget_left,
            deadline: st.cur_deadline,
        });
        self.records.push((
            at,
            SchedRecord::Replenish {
                vcpu: v,
                deadline: st.cur_deadline,
            },
        ));
    }

    /// Accounts execution up to `now`, then applies due replenishments,
    /// extratime entry and slice rotation.
    pub fn advance(&mut self, now: SimTime) {
        let start = self.last_update;
        let elapsed = now.since(start);
        self.last_update = start.max(now);
        if elapsed > 0 {
            let mut running: Vec<(usize, usize)> = self
                .current
                .iter()
                .enumerate()
                .filter_map(|(p, v)| v.map(|v| (v, p)))
                .collect();
            running.sort_unstable();
            for &(v, p) in &running {
                let class = self.vcpus[v].class;
                self.log_segment(p, v, class, start, now);
                match class {
                    ExecClass::Budgeted => self.consume_budget(v, elapsed),
                    ExecClass::Extra => self.vcpus[v].extra_used += elapsed,
                }
            }
        }

        for v in 0..self.vcpus.len() {
            if self.vcpus[v].activated && self.vcpus[v].cur_deadline <= now {
                self.replenish(v, now);
            }
        }
        for v in 0..self.vcpus.len() {
            let st = &self.vcpus[v];
            if st.runnable && st.budget_left == 0 && st.params.extratime {
                self.push_extra(v);
            }
        }
        for p in 0..self.current.len() {
            if let Some(v) = self.current[p] {
                let st = &self.vcpus[v];
                if st.class == ExecClass::Extra && st.extra_used >= self.extra_slice {
                    let pool = st.pool;
                    self.pools[pool].extra.retain(|&x| x != v);
                    self.pools[pool].extra.push_back(v);
                    self.vcpus[v].extra_used = 0;
                }
            }
        }
    }

    fn log_segment(&mut self, pcpu: usize, vcpu: usize, class: ExecClass, start: SimTime, end: SimTime) {
        if !self.keep_segments || end <= start {
            return;
        }
        if let Some(i) = self.open_segment[pcpu] {
            let seg = &mut self.segments[i];
            if seg.vcpu == vcpu && seg.class == class && seg.end == start {
                seg.end = end;
                return;
            }
        }
        self.segments.push(Segment {
            pcpu,
            vcpu,
            class,
            start,
            end,
        });
        self.open_segment[pcpu] = Some(self.segments.len() - 1);
    }

    /// Charges `ran_for` of budgeted execution to `v`. A vCPU that runs dry
    /// becomes depleted, or joins the extratime class when allowed to.
    pub fn consume_budget(&mut self, v: usize, ran_for: Nanos) {
        let st = &mut self.vcpus[v];
        if st.budget_left == 0 {
            return;
        }
        st.budget_left = st.budget_left.saturating_sub(ran_for);
        // Running dry exactly at the period boundary is not a depletion: the
        // refill happens at the same decision point.
        if st.budget_left == 0 && st.cur_deadline > self.last_update {
            self.records.push((self.last_update, SchedRecord::Deplete { vcpu: v }));
            if self.vcpus[v].runnable && self.vcpus[v].params.extratime {
                self.push_extra(v);
            }
        }
    }

    /// Refills `v` and moves its deadline forward by whole periods past `at`.
    pub fn replenish(&mut self, v: usize, at: SimTime) {
        let period = self.vcpus[v].params.period_ns();
        let st = &mut self.vcpus[v];
        st.budget_left = st.params.budget_ns();
        if st.activated {
            while st.cur_deadline <= at {
                st.cur_deadline += period;
            }
        } else {
            st.activated = true;
            st.cur_deadline = at + period;
        }
        self.drop_extra(v);
        self.grant(v, at);
    }

    /// Marks `v` runnable. A server whose deadline has passed (or that never
    /// ran) restarts with a full budget and deadline `now + period`.
    pub fn vcpu_wake(&mut self, v: usize, now: SimTime) -> Result<(), RtdsError> {
        self.check(v)?;
        let st = &mut self.vcpus[v];
        if !st.activated || st.cur_deadline <= now {
            st.activated = true;
            st.budget_left = st.params.budget_ns();
            st.cur_deadline = now + st.params.period_ns();
            self.drop_extra(v);
            self.grant(v, now);
        }
        let st = &mut self.vcpus[v];
        if st.runnable {
            return Ok(());
        }
        st.runnable = true;
        if st.budget_left == 0 && st.params.extratime {
            self.push_extra(v);
        }
        Ok(())
    }

    /// Marks `v` blocked; it leaves its pCPU immediately.
    pub fn vcpu_block(&mut self, v: usize, now: SimTime) -> Result<(), RtdsError> {
        self.check(v)?;
        if !self.vcpus[v].runnable {
            return Ok(());
        }
        self.vcpus[v].runnable = false;
        self.drop_extra(v);
        if let Some(p) = self.vcpus[v].running_on.take() {
            self.current[p] = None;
            self.records.push((now, SchedRecord::Preempt { pcpu: p, vcpu: v }));
        }
        Ok(())
    }

    pub fn set_policy(&mut self, pool: usize, policy: SchedPolicy) -> Result<(), RtdsError> {
        let p = self.pools.get_mut(pool).ok_or(RtdsError::UnknownPool(pool))?;
        p.policy = policy;
        self.rebuild_queues();
        Ok(())
    }

    /// Changes a server's parameters. The residual budget is clamped to the
    /// new budget; a new period applies from the next replenishment.
    pub fn set_params(&mut self, v: usize, params: RtdsParams) -> Result<(), RtdsError> {
        self.check(v)?;
        params.check()?;
        let st = &mut self.vcpus[v];
        st.params = params;
        st.budget_left = st.budget_left.min(params.budget_ns());
        if st.runnable && st.budget_left == 0 {
            if params.extratime {
                self.push_extra(v);
            } else {
                self.drop_extra(v);
            }
        }
        self.rebuild_queues();
        Ok(())
    }

    fn rebuild_queues(&mut self) {
        for pool in 0..self.pools.len() {
            let mut runqueue: Vec<usize> = (0..self.vcpus.len())
                .filter(|&v| {
                    let st = &self.vcpus[v];
                    st.pool == pool && st.runnable && st.budget_left > 0
                })
                .collect();
            runqueue.sort_by_key(|&v| self.priority_key(v));
            let depleted = (0..self.vcpus.len())
                .filter(|&v| {
                    let st = &self.vcpus[v];
                    st.pool == pool && st.runnable && st.budget_left == 0
                })
                .collect();
            self.pools[pool].queues = PoolQueues { runqueue, depleted };
        }
    }

    fn compute_assignment(&self) -> Vec<Option<(usize, ExecClass)>> {
        let mut assign: Vec<Option<(usize, ExecClass)>> = vec![None; self.current.len()];
        for pool in &self.pools {
            let budgeted = pool.queues.runqueue.iter().map(|&v| (v, ExecClass::Budgeted));
            let extra = pool
                .extra
                .iter()
                .filter(|&&v| self.vcpus[v].runnable && self.vcpus[v].budget_left == 0)
                .map(|&v| (v, ExecClass::Extra));
            for (v, class) in budgeted.chain(extra) {
                let st = &self.vcpus[v];
                let sticky = st
                    .running_on
                    .filter(|&p| assign[p].is_none() && st.affinity.contains(&p));
                let target = sticky.or_else(|| st.affinity.iter().copied().find(|&p| assign[p].is_none()));
                if let Some(p) = target {
                    assign[p] = Some((v, class));
                }
            }
        }
        assign
    }

    /// Re-sorts the queues and recomputes which vCPU runs on each pCPU.
    pub fn reschedule(&mut self, now: SimTime) {
        self.rebuild_queues();
        let assign = self.compute_assignment();
        for (p, slot) in assign.iter().enumerate() {
            let prev = self.current[p];
            let next = slot.map(|(v, _)| v);
            if prev != next {
                if let Some(old) = prev {
                    if self.vcpus[old].running_on == Some(p) {
                        self.vcpus[old].running_on = None;
                    }
                    self.records.push((now, SchedRecord::Preempt { pcpu: p, vcpu: old }));
                }
            }
        }
        for (p, slot) in assign.iter().enumerate() {
            let prev = self.current[p];
            match *slot {
                Some((v, class)) => {
                    let changed = prev != Some(v) || self.vcpus[v].class != class;
                    self.vcpus[v].running_on = Some(p);
                    self.vcpus[v].class = class;
                    if changed {
                        self.records.push((now, SchedRecord::Pick { pcpu: p, vcpu: v, class }));
                    }
                }
                None if prev.is_some() => self.records.push((now, SchedRecord::Idle { pcpu: p })),
                None => {}
            }
            self.current[p] = slot.map(|(v, _)| v);
        }
    }

    /// The vCPU `pcpu` would run if a decision were taken now.
    pub fn pick_vcpu(&self, pcpu: usize) -> Option<usize> {
        let mut probe = self.clone();
        probe.keep_segments = false;
        probe.rebuild_queues();
        probe.compute_assignment().get(pcpu).copied().flatten().map(|(v, _)| v)
    }

    /// Timer events the owner must arm after a decision at `now`.
    pub fn next_timers(&self, now: SimTime) -> Vec<(SimTime, EventKind)> {
        let mut out = Vec::new();
        for (v, st) in self.vcpus.iter().enumerate() {
            if st.running_on.is_some() {
                match st.class {
                    ExecClass::Budgeted if st.budget_left > 0 => {
                        out.push((now + st.budget_left, EventKind::BudgetExhausted { vcpu: v }));
                    }
                    ExecClass::Extra => {
                        let left = self.extra_slice.saturating_sub(st.extra_used).max(1);
                        out.push((now + left, EventKind::TimerFire { timer: v }));
                    }
                    _ => {}
                }
            }
            if st.activated {
                out.push((st.cur_deadline.max(now), EventKind::PeriodReplenish { vcpu: v }));
            }
        }
        out
    }
}

/// A period in which a vCPU's budgeted execution exceeded its grant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetViolation {
    pub vcpu: usize,
    pub window_start: SimTime,
    pub granted: Nanos,
    pub executed: Nanos,
}

/// Budgeted execution of each vCPU per grant window `[grant, next grant)`.
pub fn budget_usage(segments: &[Segment], grants: &[Grant], vcpu: usize) -> Vec<(Grant, Nanos)> {
    let mut windows: Vec<Grant> = grants.iter().filter(|g| g.vcpu == vcpu).copied().collect();
    windows.sort_by_key(|g| g.at);
    let mut used = vec![0u64; windows.len()];
    for seg in segments.iter().filter(|s| s.vcpu == vcpu && s.class == ExecClass::Budgeted) {
        for (i, g) in windows.iter().enumerate() {
            let end = windows.get(i + 1).map_or(SimTime::MAX, |n| n.at);
            let lo = seg.start.max(g.at);
            let hi = seg.end.min(end);
            if hi > lo {
                used[i] += hi - lo;
            }
        }
    }
    windows.into_iter().zip(used).collect()
}

/// Audits every grant window of every vCPU; empty when the budget bound held.
pub fn audit_budget(segments: &[Segment], grants: &[Grant], vcpu_count: usize) -> Vec<BudgetViolation> {
    let mut out = Vec::new();
    for v in 0..vcpu_count {
        for (g, executed) in budget_usage(segments, grants, v) {
            if executed > g.budget {
                out.push(BudgetViolation {
                    vcpu: v,
                    window_start: g.at,
                    granted: g.budget,
                    executed,
                });
            }
        }
    }
    out
}

/// Convenience for tests and demos: a single-pool scheduler over `pcpus`.
pub fn single_pool(
    pcpus: usize,
    policy: SchedPolicy,
    servers: &[(RtdsParams, &[usize])],
) -> Result<Rtds, RtdsError> {
    let pool = CpuPool {
        name: "pool0".into(),
        pcpus: (0..pcpus).collect(),
        policy,
    };
    let vcpus = servers
        .iter()
        .enumerate()
        .map(|(i, (params, aff))| VcpuConfig {
            name: format!("v{i}"),
            pool: 0,
            params: *params,
            affinity: aff.iter().copied().collect(),
        })
        .collect();
    Rtds::new(pcpus, &[pool], vcpus, us(DEFAULT_EXTRA_SLICE_US))
}
