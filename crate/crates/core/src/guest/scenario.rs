//! Scripted single-CPU runs of the guest scheduler.
//!
//! Each task follows a list of steps (compute, lock, wait, sleep, ...).
//! Non-compute steps take no time. The CPU is always available, so the runs
//! isolate the guest policy from hypervisor effects.

use std::collections::BTreeMap;

use crate::sim::{EventKind, EventQueue, SimError};
use crate::time::{Nanos, SimTime};

use super::{GuestError, GuestPolicy, GuestScheduler, LockOutcome, TaskState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Compute(Nanos),
    Lock(usize),
    Unlock(usize),
    Wait(usize),
    Signal(usize),
    Broadcast(usize),
    Sleep(Nanos),
}

#[derive(Debug, Clone)]
pub struct TaskScript {
    pub name: String,
    pub policy: GuestPolicy,
    pub start: SimTime,
    pub steps: Vec<Step>,
    /// Start over after the last step instead of exiting.
    pub repeat: bool,
}

impl TaskScript {
    pub fn new(name: &str, policy: GuestPolicy, start: SimTime, steps: Vec<Step>) -> Self {
        TaskScript {
            name: name.into(),
            policy,
            start,
            steps,
            repeat: false,
        }
    }

    pub fn repeating(mut self) -> Self {
        self.repeat = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub tasks: Vec<TaskScript>,
    pub mutexes: usize,
    pub condvars: usize,
    pub rr_timeslice: Nanos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSegment {
    pub task: usize,
    pub start: SimTime,
    pub end: SimTime,
}

/// Scheduling rank: lower runs first. DEADLINE tasks rank by absolute
/// deadline ahead of every FIFO/RR task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rank {
    Deadline(SimTime),
    Fixed(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub at: SimTime,
    pub running: Option<(usize, Rank)>,
    /// Other ready tasks with their ranks.
    pub ready: Vec<(usize, Rank)>,
}

impl Decision {
    /// A ready task that should have been running instead.
    pub fn inversion(&self) -> Option<usize> {
        let best = self.ready.iter().min_by_key(|(_, r)| *r)?;
        match self.running {
            None => Some(best.0),
            Some((_, r)) if best.1 < r => Some(best.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioRun {
    pub segments: Vec<TaskSegment>,
    pub decisions: Vec<Decision>,
    /// Wake order of every signal/broadcast.
    pub wake_orders: Vec<(SimTime, Vec<usize>)>,
    /// `(time, mutex, task)` for every acquisition.
    pub acquisitions: Vec<(SimTime, usize, usize)>,
    /// Effective priority of the owner whenever a lock attempt blocked.
    pub boosts: Vec<(SimTime, usize, u8)>,
}

impl ScenarioRun {
    /// Total execution of `task` inside `[from, to)`.
    pub fn cpu_time(&self, task: usize, from: SimTime, to: SimTime) -> Nanos {
        self.segments
            .iter()
            .filter(|s| s.task == task)
            .map(|s| {
                let lo = s.start.max(from);
                let hi = s.end.min(to);
                if hi > lo {
                    hi - lo
                } else {
                    0
                }
            })
            .sum()
    }

    /// Order in which tasks first ran at or after `t`.
    pub fn first_runs_after(&self, t: SimTime) -> Vec<usize> {
        let mut seen = Vec::new();
        for s in self.segments.iter().filter(|s| s.end > t) {
            if !seen.contains(&s.task) {
                seen.push(s.task);
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Guest(#[from] GuestError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("task {0} loops without computing")]
    Livelock(usize),
}

const GUEST_TIMER: usize = 0;

pub struct UniSim {
    guest: GuestScheduler,
    scripts: Vec<TaskScript>,
    pc: Vec<usize>,
    left: Vec<Nanos>,
    queue: EventQueue,
    armed: BTreeMap<EventKind, SimTime>,
    last: SimTime,
    run: ScenarioRun,
}

impl UniSim {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        let mut guest = GuestScheduler::new(scenario.rr_timeslice);
        for _ in 0..scenario.mutexes {
            guest.new_mutex();
        }
        for _ in 0..scenario.condvars {
            guest.new_condvar();
        }
        let mut queue = EventQueue::new();
        for (i, t) in scenario.tasks.iter().enumerate() {
            guest.add_task(&t.name, t.policy)?;
            queue.schedule(t.start, EventKind::TaskReady { task: i })?;
        }
        let n = scenario.tasks.len();
        Ok(UniSim {
            guest,
            scripts: scenario.tasks,
            pc: vec![0; n],
            left: vec![0; n],
            queue,
            armed: BTreeMap::new(),
            last: SimTime::ZERO,
            run: ScenarioRun::default(),
        })
    }

    pub fn guest(&self) -> &GuestScheduler {
        &self.guest
    }

    fn rank(&self, t: usize) -> Rank {
        let task = self.guest.task(t);
        match task.abs_deadline() {
            Some(d) => Rank::Deadline(d),
            None => Rank::Fixed(u8::MAX - task.effective_prio()),
        }
    }

    fn account(&mut self, now: SimTime) {
        let elapsed = now.since(self.last);
        if let Some(c) = self.guest.current() {
            if elapsed > 0 {
                self.left[c] = self.left[c].saturating_sub(elapsed);
                self.guest.consume(c, elapsed);
                match self.run.segments.last_mut() {
                    Some(s) if s.task == c && s.end == self.last => s.end = now,
                    _ => self.run.segments.push(TaskSegment {
                        task: c,
                        start: self.last,
                        end: now,
                    }),
                }
            }
        }
        self.last = now;
    }

    /// Executes zero-time steps until the running task is computing or the
    /// CPU is idle.
    fn settle(&mut self, now: SimTime) -> Result<(), ScenarioError> {
        let mut budget = 10_000usize;
        while let Some(c) = self.guest.dispatch() {
            if self.left[c] > 0 {
                break;
            }
            budget = budget.checked_sub(1).ok_or(ScenarioError::Livelock(c))?;
            let Some(&step) = self.scripts[c].steps.get(self.pc[c]) else {
                if self.scripts[c].repeat && !self.scripts[c].steps.is_empty() {
                    self.pc[c] = 0;
                } else {
                    self.guest.block(c)?;
                }
                continue;
            };
            self.pc[c] += 1;
            match step {
                Step::Compute(d) => self.left[c] = d,
                Step::Lock(m) => match self.guest.mutex_lock(c, m)? {
                    LockOutcome::Acquired => self.run.acquisitions.push((now, m, c)),
                    LockOutcome::Blocked => {
                        let owner = self.guest.mutex(m).owner.expect("blocked on a free mutex");
                        let prio = self.guest.task(owner).effective_prio();
                        self.run.boosts.push((now, owner, prio));
                    }
                },
                Step::Unlock(m) => {
                    if let Some(n) = self.guest.mutex_unlock(c, m, now)? {
                        self.run.acquisitions.push((now, m, n));
                    }
                }
                Step::Wait(cv) => self.guest.cond_wait(c, cv)?,
                Step::Signal(cv) => {
                    let woken = self.guest.cond_signal(cv, now)?;
                    self.run.wake_orders.push((now, woken.into_iter().collect()));
                }
                Step::Broadcast(cv) => {
                    let order = self.guest.cond_broadcast(cv, now)?;
                    self.run.wake_orders.push((now, order));
                }
                Step::Sleep(d) => {
                    self.guest.block(c)?;
                    self.queue.schedule(now + d, EventKind::TaskReady { task: c })?;
                }
            }
        }
        Ok(())
    }

    fn arm(&mut self, at: SimTime, kind: EventKind) -> Result<(), SimError> {
        if self.armed.get(&kind) != Some(&at) {
            self.armed.insert(kind, at);
            self.queue.schedule(at, kind)?;
        }
        Ok(())
    }

    pub fn run(mut self, horizon: SimTime) -> Result<ScenarioRun, ScenarioError> {
        while let Some((now, batch)) = self.queue.pop_batch(horizon) {
            self.account(now);
            self.guest.advance(now);
            for ev in batch {
                match ev.kind {
                    EventKind::TaskReady { task } => self.guest.wake(task, now)?,
                    kind => {
                        if self.armed.get(&kind) == Some(&now) {
                            self.armed.remove(&kind);
                        }
                    }
                }
            }
            self.settle(now)?;

            let running = self.guest.current().map(|c| (c, self.rank(c)));
            let ready = (0..self.scripts.len())
                .filter(|&t| self.guest.task(t).state == TaskState::Ready)
                .map(|t| (t, self.rank(t)))
                .collect();
            self.run.decisions.push(Decision { at: now, running, ready });

            if let Some(c) = self.guest.current() {
                self.arm(now + self.left[c], EventKind::TaskComplete { task: c })?;
            }
            if let Some(t) = self.guest.next_timer(now) {
                self.arm(t, EventKind::TimerFire { timer: GUEST_TIMER })?;
            }
        }
        self.account(horizon);
        Ok(self.run)
    }
}
