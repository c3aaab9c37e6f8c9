//! Reference RTDS scheduler that takes a decision on every 1 us tick.
//!
//! Written separately from the event-driven scheduler and kept deliberately
//! naive: it never skips ahead, so any decision the event-driven version
//! misses shows up as a trace difference.

use std::collections::VecDeque;

use isolab_core::platform::SchedPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    Wake,
    Block,
    Params { budget: u64, period: u64, extra: bool },
    Policy(SchedPolicy),
}

#[derive(Debug, Clone, Copy)]
pub struct Ev {
    pub at_us: u64,
    pub vcpu: usize,
    pub act: Act,
}

#[derive(Debug, Clone)]
pub struct OracleVcpu {
    pub budget: u64,
    pub period: u64,
    pub extra: bool,
    pub affinity: Vec<usize>,
}

/// `(pcpu, vcpu, extra_class, start_us, end_us)`, merged when contiguous.
pub type Seg = (usize, usize, bool, u64, u64);

struct V {
    cfg: OracleVcpu,
    left: u64,
    deadline: u64,
    started: bool,
    runnable: bool,
    on: Option<usize>,
    extra_class: bool,
    extra_used: u64,
}

pub fn run(
    pcpus: usize,
    mut policy: SchedPolicy,
    vcpus: &[OracleVcpu],
    script: &[Ev],
    slice_us: u64,
    horizon_us: u64,
) -> Vec<Seg> {
    let mut vs: Vec<V> = vcpus
        .iter()
        .map(|c| V {
            cfg: c.clone(),
            left: c.budget,
            deadline: 0,
            started: false,
            runnable: false,
            on: None,
            extra_class: false,
            extra_used: 0,
        })
        .collect();
    let mut rr: VecDeque<usize> = VecDeque::new();
    let mut cur: Vec<Option<usize>> = vec![None; pcpus];
    let mut segs: Vec<Seg> = Vec::new();

    for t in 0..horizon_us {
        // replenishment
        for (i, v) in vs.iter_mut().enumerate() {
            if v.started && v.deadline <= t {
                v.left = v.cfg.budget;
                while v.deadline <= t {
                    v.deadline += v.cfg.period;
                }
                rr.retain(|&x| x != i);
                v.extra_used = 0;
            }
        }
        // extratime entry
        for i in 0..vs.len() {
            let v = &vs[i];
            if v.runnable && v.left == 0 && v.cfg.extra && !rr.contains(&i) {
                rr.push_back(i);
            }
        }
        // slice rotation
        for p in 0..pcpus {
            if let Some(i) = cur[p] {
                if vs[i].extra_class && vs[i].extra_used >= slice_us {
                    rr.retain(|&x| x != i);
                    rr.push_back(i);
                    vs[i].extra_used = 0;
                }
            }
        }
        // script
        for ev in script.iter().filter(|e| e.at_us == t) {
            let i = ev.vcpu;
            match ev.act {
                Act::Wake => {
                    let v = &mut vs[i];
                    if !v.started || v.deadline <= t {
                        v.started = true;
                        v.left = v.cfg.budget;
                        v.deadline = t + v.cfg.period;
                        rr.retain(|&x| x != i);
                        vs[i].extra_used = 0;
                    }
                    let v = &mut vs[i];
                    if !v.runnable {
                        v.runnable = true;
                        if v.left == 0 && v.cfg.extra && !rr.contains(&i) {
                            rr.push_back(i);
                        }
                    }
                }
                Act::Block => {
                    if vs[i].runnable {
                        vs[i].runnable = false;
                        rr.retain(|&x| x != i);
                        vs[i].extra_used = 0;
                        if let Some(p) = vs[i].on.take() {
                            cur[p] = None;
                        }
                    }
                }
                Act::Params { budget, period, extra } => {
                    let v = &mut vs[i];
                    v.cfg.budget = budget;
                    v.cfg.period = period;
                    v.cfg.extra = extra;
                    v.left = v.left.min(budget);
                    if v.runnable && v.left == 0 {
                        if extra {
                            if !rr.contains(&i) {
                                rr.push_back(i);
                            }
                        } else {
                            rr.retain(|&x| x != i);
                            vs[i].extra_used = 0;
                        }
                    }
                }
                Act::Policy(p) => policy = p,
            }
        }
        // assignment
        let mut order: Vec<usize> = (0..vs.len()).filter(|&i| vs[i].runnable && vs[i].left > 0).collect();
        order.sort_by_key(|&i| match policy {
            SchedPolicy::EDF => (vs[i].deadline, i),
            SchedPolicy::RM => (vs[i].cfg.period, i),
        });
        let mut cands: Vec<(usize, bool)> = order.into_iter().map(|i| (i, false)).collect();
        cands.extend(
            rr.iter()
                .filter(|&&i| vs[i].runnable && vs[i].left == 0)
                .map(|&i| (i, true)),
        );
        let mut next: Vec<Option<(usize, bool)>> = vec![None; pcpus];
        for (i, extra_class) in cands {
            let aff = &vs[i].cfg.affinity;
            let target = vs[i]
                .on
                .filter(|&p| next[p].is_none() && aff.contains(&p))
                .or_else(|| aff.iter().copied().find(|&p| next[p].is_none()));
            if let Some(p) = target {
                next[p] = Some((i, extra_class));
            }
        }
        for v in vs.iter_mut() {
            v.on = None;
        }
        for p in 0..pcpus {
            cur[p] = next[p].map(|(i, _)| i);
            if let Some((i, extra_class)) = next[p] {
                vs[i].on = Some(p);
                vs[i].extra_class = extra_class;
            }
        }
        // execute one tick
        for p in 0..pcpus {
            let Some((i, extra_class)) = next[p] else { continue };
            match segs.iter_mut().rev().find(|s| s.0 == p) {
                Some(s) if s.1 == i && s.2 == extra_class && s.4 == t => s.4 = t + 1,
                _ => segs.push((p, i, extra_class, t, t + 1)),
            }
        }
        let mut running: Vec<(usize, bool)> = next.iter().flatten().copied().collect();
        running.sort_unstable();
        for (i, extra_class) in running {
            let v = &mut vs[i];
            if extra_class {
                v.extra_used += 1;
            } else if v.left > 0 {
                v.left -= 1;
                if v.left == 0 && v.runnable && v.cfg.extra && !rr.contains(&i) {
                    rr.push_back(i);
                }
            }
        }
    }
    segs.sort_by_key(|s| (s.0, s.3));
    segs
}
