//! Guest OS scheduling on one vCPU.
//!
//! Three real-time classes: DEADLINE (EDF over runtime/deadline/period
//! servers) outranks FIFO and RR, which share the fixed 1-99 priority range.
//! Equal-priority FIFO/RR tasks run in queue order; a woken task joins the
//! tail, a preempted one keeps its place, and an RR task moves to the tail
//! when its timeslice runs out.
//!
//! A DEADLINE task that wakes inside its current period keeps the runtime it
//! has left; a wake after the period ends starts a new period at the wake
//! time. A task whose runtime hits zero is throttled until its period ends.

pub mod scenario;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{ms, us, Nanos, SimTime};

/// Default RR timeslice (100 ms).
pub const DEFAULT_RR_TIMESLICE: Nanos = ms(100);

/// Priority DEADLINE tasks donate through priority inheritance.
const DL_PRIO: u8 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "UPPERCASE")]
pub enum GuestPolicy {
    Fifo { prio: u8 },
    Rr { prio: u8 },
    Deadline {
        runtime_us: u64,
        deadline_us: u64,
        period_us: u64,
    },
}

impl GuestPolicy {
    pub fn check(&self) -> Result<(), String> {
        match *self {
            GuestPolicy::Fifo { prio } | GuestPolicy::Rr { prio } => {
                if (1..=99).contains(&prio) {
                    Ok(())
                } else {
                    Err(format!("priority {prio} outside 1..=99"))
                }
            }
            GuestPolicy::Deadline {
                runtime_us,
                deadline_us,
                period_us,
            } => {
                if runtime_us > 0 && runtime_us <= deadline_us && deadline_us <= period_us {
                    Ok(())
                } else {
                    Err(format!(
                        "need 0 < runtime ({runtime_us}) <= deadline ({deadline_us}) <= period ({period_us})"
                    ))
                }
            }
        }
    }

    /// Short label used in run ids: FIFO, RR or DEADLINE.
    pub fn class_name(&self) -> &'static str {
        match self {
            GuestPolicy::Fifo { .. } => "FIFO",
            GuestPolicy::Rr { .. } => "RR",
            GuestPolicy::Deadline { .. } => "DEADLINE",
        }
    }

    fn base_prio(&self) -> u8 {
        match *self {
            GuestPolicy::Fifo { prio } | GuestPolicy::Rr { prio } => prio,
            GuestPolicy::Deadline { .. } => DL_PRIO,
        }
    }
}

impl fmt::Display for GuestPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GuestPolicy::Fifo { prio } => write!(f, "FIFO(prio={prio})"),
            GuestPolicy::Rr { prio } => write!(f, "RR(prio={prio})"),
            GuestPolicy::Deadline {
                runtime_us,
                deadline_us,
                period_us,
            } => write!(
                f,
                "DEADLINE(runtime={runtime_us}us,deadline={deadline_us}us,period={period_us}us)"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskState {
    Running,
    Ready,
    Blocked,
    Throttled,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuestError {
    #[error("task {task} unlocked mutex {mutex} it does not own")]
    UnlockNotOwner { task: usize, mutex: usize },
    #[error("unknown task {0}")]
    UnknownTask(usize),
    #[error("unknown mutex {0}")]
    UnknownMutex(usize),
    #[error("unknown condition variable {0}")]
    UnknownCondVar(usize),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy)]
struct DlServer {
    runtime: Nanos,
    deadline: Nanos,
    period: Nanos,
    remaining: Nanos,
    abs_deadline: SimTime,
    period_end: SimTime,
    started: bool,
}

impl DlServer {
    fn restart(&mut self, at: SimTime) {
        self.remaining = self.runtime;
        self.abs_deadline = at + self.deadline;
        self.period_end = at + self.period;
        self.started = true;
    }
}

#[derive(Debug, Clone)]
pub struct GuestTask {
    pub name: String,
    pub policy: GuestPolicy,
    pub state: TaskState,
    base_prio: u8,
    eff_prio: u8,
    dl: Option<DlServer>,
    rr_used: Nanos,
    stamp: u64,
    waiting_on: Option<usize>,
}

impl GuestTask {
    pub fn effective_prio(&self) -> u8 {
        self.eff_prio
    }

    pub fn base_prio(&self) -> u8 {
        self.base_prio
    }

    pub fn is_deadline(&self) -> bool {
        self.dl.is_some()
    }

    /// Runtime left in the current period (DEADLINE only).
    pub fn remaining_runtime(&self) -> Option<Nanos> {
        self.dl.map(|d| d.remaining)
    }

    pub fn abs_deadline(&self) -> Option<SimTime> {
        self.dl.map(|d| d.abs_deadline)
    }

    fn runnable(&self) -> bool {
        matches!(self.state, TaskState::Ready | TaskState::Running)
    }
}

/// Priority-inheritance mutex.
#[derive(Debug, Clone, Default)]
pub struct PiMutex {
    pub owner: Option<usize>,
    /// Waiting tasks in arrival order; hand-off picks the highest priority.
    pub waiters: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct CondVar {
    pub waiters: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockOutcome {
    Acquired,
    Blocked,
}

#[derive(Debug, Clone)]
pub struct GuestScheduler {
    tasks: Vec<GuestTask>,
    mutexes: Vec<PiMutex>,
    condvars: Vec<CondVar>,
    current: Option<usize>,
    rr_timeslice: Nanos,
    next_stamp: u64,
}

impl Default for GuestScheduler {
    fn default() -> Self {
        GuestScheduler::new(DEFAULT_RR_TIMESLICE)
    }
}

impl GuestScheduler {
    pub fn new(rr_timeslice: Nanos) -> Self {
        GuestScheduler {
            tasks: Vec::new(),
            mutexes: Vec::new(),
            condvars: Vec::new(),
            current: None,
            rr_timeslice: rr_timeslice.max(1),
            next_stamp: 0,
        }
    }

    /// Adds a blocked task.
    pub fn add_task(&mut self, name: &str, policy: GuestPolicy) -> Result<usize, GuestError> {
        policy.check().map_err(GuestError::InvalidPolicy)?;
        let dl = match policy {
            GuestPolicy::Deadline {
                runtime_us,
                deadline_us,
                period_us,
            } => Some(DlServer {
                runtime: us(runtime_us),
                deadline: us(deadline_us),
                period: us(period_us),
                remaining: us(runtime_us),
                abs_deadline: SimTime::ZERO,
                period_end: SimTime::ZERO,
                started: false,
            }),
            _ => None,
        };
        self.tasks.push(GuestTask {
            name: name.to_string(),
            policy,
            state: TaskState::Blocked,
            base_prio: policy.base_prio(),
            eff_prio: policy.base_prio(),
            dl,
            rr_used: 0,
            stamp: 0,
            waiting_on: None,
        });
        Ok(self.tasks.len() - 1)
    }

    pub fn task(&self, t: usize) -> &GuestTask {
        &self.tasks[t]
    }

    pub fn tasks(&self) -> &[GuestTask] {
        &self.tasks
    }

    pub fn current(&self) -> Option<usize> {
        self.current
    }

    pub fn mutex(&self, m: usize) -> &PiMutex {
        &self.mutexes[m]
    }

    fn check_task(&self, t: usize) -> Result<(), GuestError> {
        if t < self.tasks.len() {
            Ok(())
        } else {
            Err(GuestError::UnknownTask(t))
        }
    }

    fn stamp(&mut self) -> u64 {
        self.next_stamp += 1;
        self.next_stamp
    }

    /// Makes a blocked task runnable.
    pub fn wake(&mut self, t: usize, now: SimTime) -> Result<(), GuestError> {
        self.check_task(t)?;
        if self.tasks[t].state != TaskState::Blocked {
            return Ok(());
        }
        let stamp = self.stamp();
        let task = &mut self.tasks[t];
        task.stamp = stamp;
        task.rr_used = 0;
        task.state = TaskState::Ready;
        if let Some(dl) = &mut task.dl {
            if !dl.started || now >= dl.period_end {
                dl.restart(now);
            } else if dl.remaining == 0 {
                task.state = TaskState::Throttled;
            }
        }
        Ok(())
    }

    /// Takes a task off the CPU until it is woken again.
    pub fn block(&mut self, t: usize) -> Result<(), GuestError> {
        self.check_task(t)?;
        self.tasks[t].state = TaskState::Blocked;
        if self.current == Some(t) {
            self.current = None;
        }
        Ok(())
    }

    /// Whether any task is ready to run.
    pub fn has_runnable(&self) -> bool {
        self.tasks.iter().any(|t| t.runnable())
    }

    /// Refills throttled DEADLINE tasks whose period has ended.
    pub fn advance(&mut self, now: SimTime) {
        for task in &mut self.tasks {
            if let Some(dl) = &mut task.dl {
                if task.state == TaskState::Throttled && dl.period_end <= now {
                    let start = dl.period_end;
                    dl.restart(start);
                    task.state = TaskState::Ready;
                }
            }
        }
    }

    /// Charges `ran_for` of execution to `t`.
    pub fn consume(&mut self, t: usize, ran_for: Nanos) {
        if ran_for == 0 {
            return;
        }
        if self.tasks[t].dl.is_some() {
            self.deadline_throttle(t, ran_for);
        } else if matches!(self.tasks[t].policy, GuestPolicy::Rr { .. }) {
            self.tasks[t].rr_used += ran_for;
            if self.tasks[t].rr_used >= self.rr_timeslice {
                let stamp = self.stamp();
                self.tasks[t].stamp = stamp;
                self.tasks[t].rr_used = 0;
            }
        }
    }

    /// Decrements a DEADLINE task's runtime; at zero the task is throttled
    /// until its period ends.
    pub fn deadline_throttle(&mut self, t: usize, consumed: Nanos) {
        let task = &mut self.tasks[t];
        let Some(dl) = &mut task.dl else { return };
        dl.remaining = dl.remaining.saturating_sub(consumed);
        if dl.remaining == 0 && task.runnable() {
            task.state = TaskState::Throttled;
            if self.current == Some(t) {
                self.current = None;
            }
        }
    }

    /// The task that should run now, without changing any state.
    pub fn pick_task(&self) -> Option<usize> {
        let dl = self
            .tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.runnable() && t.dl.is_some())
            .min_by_key(|(i, t)| (t.dl.unwrap().abs_deadline, *i))
            .map(|(i, _)| i);
        dl.or_else(|| {
            self.tasks
                .iter()
                .enumerate()
                .filter(|(_, t)| t.runnable() && t.dl.is_none())
                .min_by_key(|(i, t)| (std::cmp::Reverse(t.eff_prio), t.stamp, *i))
                .map(|(i, _)| i)
        })
    }

    /// Applies [`pick_task`](Self::pick_task): the chosen task becomes
    /// Running and a displaced one goes back to Ready.
    pub fn dispatch(&mut self) -> Option<usize> {
        let next = self.pick_task();
        if next != self.current {
            if let Some(prev) = self.current {
                if self.tasks[prev].state == TaskState::Running {
                    self.tasks[prev].state = TaskState::Ready;
                }
            }
            if let Some(n) = next {
                self.tasks[n].state = TaskState::Running;
            }
            self.current = next;
        }
        next
    }

    /// Deschedules the running task (the vCPU lost its pCPU).
    pub fn park(&mut self) {
        if let Some(prev) = self.current.take() {
            if self.tasks[prev].state == TaskState::Running {
                self.tasks[prev].state = TaskState::Ready;
            }
        }
    }

    /// Earliest time at which this guest needs a scheduling decision.
    pub fn next_timer(&self, now: SimTime) -> Option<SimTime> {
        let mut next: Option<SimTime> = None;
        let mut consider = |t: SimTime| next = Some(next.map_or(t, |n| n.min(t)));
        if let Some(c) = self.current {
            let task = &self.tasks[c];
            if let Some(dl) = task.dl {
                consider(now + dl.remaining);
            } else if matches!(task.policy, GuestPolicy::Rr { .. }) {
                consider(now + (self.rr_timeslice - task.rr_used));
            }
        }
        for task in &self.tasks {
            if let (TaskState::Throttled, Some(dl)) = (task.state, task.dl) {
                consider(dl.period_end.max(now));
            }
        }
        next
    }

    pub fn new_mutex(&mut self) -> usize {
        self.mutexes.push(PiMutex::default());
        self.mutexes.len() - 1
    }

    pub fn new_condvar(&mut self) -> usize {
        self.condvars.push(CondVar::default());
        self.condvars.len() - 1
    }

    /// Acquires `m` or blocks `t` on it, boosting the owner.
    pub fn mutex_lock(&mut self, t: usize, m: usize) -> Result<LockOutcome, GuestError> {
        self.check_task(t)?;
        let mutex = self.mutexes.get_mut(m).ok_or(GuestError::UnknownMutex(m))?;
        match mutex.owner {
            None => {
                mutex.owner = Some(t);
                Ok(LockOutcome::Acquired)
            }
            Some(owner) if owner == t => Ok(LockOutcome::Acquired),
            Some(_) => {
                mutex.waiters.push(t);
                self.tasks[t].waiting_on = Some(m);
                self.block(t)?;
                self.update_priorities();
                Ok(LockOutcome::Blocked)
            }
        }
    }

    /// Releases `m`, handing it to the highest-priority waiter, which is
    /// woken and returned.
    pub fn mutex_unlock(&mut self, t: usize, m: usize, now: SimTime) -> Result<Option<usize>, GuestError> {
        self.check_task(t)?;
        let mutex = self.mutexes.get(m).ok_or(GuestError::UnknownMutex(m))?;
        if mutex.owner != Some(t) {
            return Err(GuestError::UnlockNotOwner { task: t, mutex: m });
        }
        let next = self.highest_waiter(&mutex.waiters);
        let mutex = &mut self.mutexes[m];
        mutex.owner = next;
        if let Some(n) = next {
            mutex.waiters.retain(|&w| w != n);
            self.tasks[n].waiting_on = None;
            self.wake(n, now)?;
        }
        self.update_priorities();
        Ok(next)
    }

    fn highest_waiter(&self, waiters: &[usize]) -> Option<usize> {
        waiters
            .iter()
            .enumerate()
            .min_by_key(|(pos, &w)| (std::cmp::Reverse(self.tasks[w].eff_prio), *pos))
            .map(|(_, &w)| w)
    }

    /// Blocks `t` on condition variable `cv`.
    pub fn cond_wait(&mut self, t: usize, cv: usize) -> Result<(), GuestError> {
        self.check_task(t)?;
        let c = self.condvars.get_mut(cv).ok_or(GuestError::UnknownCondVar(cv))?;
        c.waiters.push(t);
        self.block(t)
    }

    /// Wakes the highest-priority waiter of `cv`.
    pub fn cond_signal(&mut self, cv: usize, now: SimTime) -> Result<Option<usize>, GuestError> {
        let c = self.condvars.get(cv).ok_or(GuestError::UnknownCondVar(cv))?;
        let Some(w) = self.highest_waiter(&c.waiters) else {
            return Ok(None);
        };
        self.condvars[cv].waiters.retain(|&x| x != w);
        self.wake(w, now)?;
        Ok(Some(w))
    }

    /// Wakes every waiter of `cv`, highest priority first; returns the
    /// wake order.
    pub fn cond_broadcast(&mut self, cv: usize, now: SimTime) -> Result<Vec<usize>, GuestError> {
        let mut order = Vec::new();
        while let Some(w) = self.cond_signal(cv, now)? {
            order.push(w);
        }
        Ok(order)
    }

    /// Recomputes effective priorities: each owner runs at the maximum of its
    /// base priority and the effective priorities of tasks waiting on its
    /// mutexes, transitively.
    fn update_priorities(&mut self) {
        for task in &mut self.tasks {
            task.eff_prio = task.base_prio;
        }
        loop {
            let mut changed = false;
            for m in 0..self.mutexes.len() {
                let Some(owner) = self.mutexes[m].owner else { continue };
                let boost = self.mutexes[m]
                    .waiters
                    .iter()
                    .map(|&w| self.tasks[w].eff_prio)
                    .max()
                    .unwrap_or(0);
                if boost > self.tasks[owner].eff_prio {
                    self.tasks[owner].eff_prio = boost;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
}
