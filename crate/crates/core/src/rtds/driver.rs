//! Standalone event-driven runner for the hypervisor scheduler: vCPUs follow
//! a scripted wake/block pattern, with no guest workload.

use std::collections::BTreeMap;

use crate::platform::{RtdsParams, SchedPolicy};
use crate::sim::{EventKind, EventQueue, SimError, Trace};
use crate::time::SimTime;

use super::{Grant, Rtds, RtdsError, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptAction {
    Wake,
    Block,
    SetParams(RtdsParams),
    SetPolicy { pool: usize, policy: SchedPolicy },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptEvent {
    pub at: SimTime,
    pub vcpu: usize,
    pub action: ScriptAction,
}

#[derive(Debug, Clone)]
pub struct RtdsRun {
    pub segments: Vec<Segment>,
    pub grants: Vec<Grant>,
    pub events: u64,
    pub trace: Trace,
}

pub struct RtdsSim {
    rtds: Rtds,
    queue: EventQueue,
    script: Vec<ScriptEvent>,
    armed: BTreeMap<EventKind, SimTime>,
    trace: Trace,
}

impl RtdsSim {
    pub fn new(mut rtds: Rtds, script: Vec<ScriptEvent>, keep_trace: bool) -> Result<Self, SimError> {
        rtds.keep_segments(true);
        let mut queue = EventQueue::new();
        for (i, ev) in script.iter().enumerate() {
            queue.schedule(ev.at, EventKind::TaskReady { task: i })?;
        }
        Ok(RtdsSim {
            rtds,
            queue,
            script,
            armed: BTreeMap::new(),
            trace: Trace::new(keep_trace),
        })
    }

    pub fn scheduler(&self) -> &Rtds {
        &self.rtds
    }

    fn apply(&mut self, ev: &ScriptEvent, now: SimTime) -> Result<(), RtdsError> {
        match ev.action {
            ScriptAction::Wake => self.rtds.vcpu_wake(ev.vcpu, now),
            ScriptAction::Block => self.rtds.vcpu_block(ev.vcpu, now),
            ScriptAction::SetParams(p) => self.rtds.set_params(ev.vcpu, p),
            ScriptAction::SetPolicy { pool, policy } => self.rtds.set_policy(pool, policy),
        }
    }

    /// Runs to `horizon` and returns the execution trace.
    pub fn run(mut self, horizon: SimTime) -> Result<RtdsRun, SimError> {
        while let Some((now, batch)) = self.queue.pop_batch(horizon) {
            self.rtds.advance(now);
            for ev in &batch {
                self.trace
                    .record(format!("{},{},{}", ev.time.as_ns(), ev.seq, ev.kind));
                match ev.kind {
                    EventKind::TaskReady { task } => {
                        let action = self.script[task];
                        self.apply(&action, now)
                            .map_err(|e| SimError::Model(e.to_string()))?;
                    }
                    kind => {
                        if self.armed.get(&kind) == Some(&now) {
                            self.armed.remove(&kind);
                        }
                    }
                }
            }
            self.rtds.reschedule(now);
            for (t, rec) in self.rtds.take_records() {
                self.trace.record(format!("{},-,{}", t.as_ns(), rec.describe()));
            }
            for (t, kind) in self.rtds.next_timers(now) {
                if self.armed.get(&kind) != Some(&t) {
                    self.armed.insert(kind, t);
                    self.queue.schedule(t, kind)?;
                }
            }
        }
        self.rtds.advance(horizon);
        Ok(RtdsRun {
            segments: self.rtds.segments().to_vec(),
            grants: self.rtds.grants().to_vec(),
            events: self.queue.dispatched(),
            trace: self.trace,
        })
    }
}
