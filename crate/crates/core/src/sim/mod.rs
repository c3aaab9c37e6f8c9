//! Deterministic discrete-event core.
//!
//! Events are totally ordered by `(time, seq)`, where `seq` is the insertion
//! counter. Handlers may only schedule events at or after the current time.

mod contention;
mod rng;
mod trace;

pub use contention::{ContentionModel, DEFAULT_KAPPA};
pub use rng::{derive_seed, fnv1a64, splitmix64, RngStream};
pub use trace::Trace;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use thiserror::Error;

use crate::time::SimTime;

/// What an event is about. Subjects are indices into the owning simulation's
/// tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    TaskReady { task: usize },
    BudgetExhausted { vcpu: usize },
    PeriodReplenish { vcpu: usize },
    TimerFire { timer: usize },
    MessageDeliver { msg: usize },
    TaskComplete { task: usize },
    SampleDue { replica: usize, seq: u32 },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::TaskReady { .. } => "TaskReady",
            EventKind::BudgetExhausted { .. } => "BudgetExhausted",
            EventKind::PeriodReplenish { .. } => "PeriodReplenish",
            EventKind::TimerFire { .. } => "TimerFire",
            EventKind::MessageDeliver { .. } => "MessageDeliver",
            EventKind::TaskComplete { .. } => "TaskComplete",
            EventKind::SampleDue { .. } => "SampleDue",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EventKind::TaskReady { task } => write!(f, "TaskReady,task={task}"),
            EventKind::BudgetExhausted { vcpu } => write!(f, "BudgetExhausted,vcpu={vcpu}"),
            EventKind::PeriodReplenish { vcpu } => write!(f, "PeriodReplenish,vcpu={vcpu}"),
            EventKind::TimerFire { timer } => write!(f, "TimerFire,timer={timer}"),
            EventKind::MessageDeliver { msg } => write!(f, "MessageDeliver,msg={msg}"),
            EventKind::TaskComplete { task } => write!(f, "TaskComplete,task={task}"),
            EventKind::SampleDue { replica, seq } => {
                write!(f, "SampleDue,replica={replica},seq={seq}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimEvent {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("event at {at} is before the current time {now}")]
    PastEvent { at: SimTime, now: SimTime },
    #[error("run_until target {target} is before the current time {now}")]
    PastTarget { target: SimTime, now: SimTime },
    #[error("{0}")]
    Model(String),
}

/// Virtual clock plus pending-event queue.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<SimEvent>>,
    now: SimTime,
    next_seq: u64,
    dispatched: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Total events handed out so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<u64, SimError> {
        if time < self.now {
            return Err(SimError::PastEvent { at: time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(SimEvent { time, seq, kind }));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(ev)| ev.time)
    }

    /// Pops the next event if it is due at or before `t_end`, advancing the
    /// clock to its time.
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<SimEvent> {
        match self.heap.peek() {
            Some(Reverse(ev)) if ev.time <= t_end => {
                let Reverse(ev) = self.heap.pop().unwrap();
                self.now = ev.time;
                self.dispatched += 1;
                Some(ev)
            }
            _ => None,
        }
    }

    /// Pops every event sharing the earliest pending time, provided that time
    /// is at or before `t_end`. Events scheduled at the same time by the caller
    /// afterwards form the next batch.
    pub fn pop_batch(&mut self, t_end: SimTime) -> Option<(SimTime, Vec<SimEvent>)> {
        let first = self.pop_due(t_end)?;
        let t = first.time;
        let mut batch = vec![first];
        while self.peek_time() == Some(t) {
            batch.push(self.pop_due(t).unwrap());
        }
        Some((t, batch))
    }

    /// Moves the clock forward without dispatching anything.
    pub fn advance_clock(&mut self, t: SimTime) -> Result<(), SimError> {
        if t < self.now {
            return Err(SimError::PastTarget { target: t, now: self.now });
        }
        self.now = t;
        Ok(())
    }

    /// Dispatches every event with `time <= t_end` in order, then sets the
    /// clock to `t_end`. Returns the number of events processed.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<usize, SimError>
    where
        F: FnMut(&mut EventQueue, SimEvent) -> Result<(), SimError>,
    {
        if t_end < self.now {
            return Err(SimError::PastTarget { target: t_end, now: self.now });
        }
        let mut count = 0;
        while let Some(ev) = self.pop_due(t_end) {
            handler(self, ev)?;
            count += 1;
        }
        self.now = t_end;
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timer(i: usize) -> EventKind {
        EventKind::TimerFire { timer: i }
    }

    #[test]
    fn same_time_dispatches_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(100), timer(1)).unwrap();
        q.schedule(SimTime::from_ns(100), timer(2)).unwrap();
        let mut seen = Vec::new();
        q.run_until(SimTime::from_ns(1000), |_, ev| {
            seen.push(ev.kind);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![timer(1), timer(2)]);
    }

    #[test]
    fn earlier_time_first() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(50), timer(50)).unwrap();
        q.schedule(SimTime::from_ns(30), timer(30)).unwrap();
        assert_eq!(q.pop_due(SimTime::MAX).unwrap().kind, timer(30));
        assert_eq!(q.pop_due(SimTime::MAX).unwrap().kind, timer(50));
    }

    #[test]
    fn past_event_rejected() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(10), timer(0)).unwrap();
        q.pop_due(SimTime::MAX).unwrap();
        assert_eq!(
            q.schedule(SimTime::from_ns(5), timer(1)),
            Err(SimError::PastEvent {
                at: SimTime::from_ns(5),
                now: SimTime::from_ns(10)
            })
        );
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut q = EventQueue::new();
        let n = q.run_until(SimTime::from_ns(1_000_000_000), |_, _| Ok(())).unwrap();
        assert_eq!(n, 0);
        assert_eq!(q.now(), SimTime::from_ns(1_000_000_000));
    }

    #[test]
    fn single_event_processed() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(500_000_000), timer(0)).unwrap();
        let n = q.run_until(SimTime::from_ns(1_000_000_000), |_, _| Ok(())).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn events_past_horizon_stay_queued() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(10), timer(0)).unwrap();
        q.schedule(SimTime::from_ns(20), timer(1)).unwrap();
        let n = q.run_until(SimTime::from_ns(15), |_, _| Ok(())).unwrap();
        assert_eq!(n, 1);
        assert_eq!(q.len(), 1);
        assert_eq!(q.now(), SimTime::from_ns(15));
    }

    #[test]
    fn handler_may_schedule_at_current_time() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(10), timer(0)).unwrap();
        let mut order = Vec::new();
        q.run_until(SimTime::from_ns(100), |q, ev| {
            order.push((ev.time.as_ns(), ev.kind));
            if ev.kind == timer(0) {
                q.schedule(ev.time, timer(1))?;
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(order, vec![(10, timer(0)), (10, timer(1))]);
    }

    #[test]
    fn batch_groups_equal_times() {
        let mut q = EventQueue::new();
        for (t, i) in [(5, 0), (5, 1), (7, 2)] {
            q.schedule(SimTime::from_ns(t), timer(i)).unwrap();
        }
        let (t, batch) = q.pop_batch(SimTime::MAX).unwrap();
        assert_eq!(t.as_ns(), 5);
        assert_eq!(batch.len(), 2);
        let (t, batch) = q.pop_batch(SimTime::MAX).unwrap();
        assert_eq!((t.as_ns(), batch.len()), (7, 1));
        assert!(q.pop_batch(SimTime::MAX).is_none());
    }
}
