#![allow(dead_code)]

pub mod protocol;
pub mod quad;
pub mod welch_cases;
pub mod tick_oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use isolab_core::platform::{RtdsParams, SchedPolicy};
use isolab_core::rtds::{self, ExecClass, RtdsRun, RtdsSim, ScriptAction, ScriptEvent};
use isolab_core::time::{us, SimTime};

use tick_oracle::{Act, Ev, OracleVcpu, Seg};

pub const SLICE_US: u64 = isolab_core::rtds::DEFAULT_EXTRA_SLICE_US;

#[derive(Debug, Clone)]
pub struct Instance {
    pub pcpus: usize,
    pub policy: SchedPolicy,
    pub vcpus: Vec<OracleVcpu>,
    pub script: Vec<Ev>,
    pub horizon_us: u64,
}

/// Random instance: up to 4 vCPUs on up to 2 pCPUs, random wake/block
/// pattern, occasional parameter and policy changes.
pub fn random_instance(seed: u64, horizon_us: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pcpus = rng.random_range(1..=2);
    let n = rng.random_range(1..=4);
    let policy = if rng.random_bool(0.5) { SchedPolicy::EDF } else { SchedPolicy::RM };
    let mut vcpus = Vec::new();
    for _ in 0..n {
        let period = rng.random_range(2..=40) * 500;
        let budget = rng.random_range(1..=period / 100) * 100;
        let mut affinity: Vec<usize> = (0..pcpus).filter(|_| rng.random_bool(0.7)).collect();
        if affinity.is_empty() {
            affinity.push(rng.random_range(0..pcpus));
        }
        vcpus.push(OracleVcpu {
            budget,
            period,
            extra: rng.random_bool(0.4),
            affinity,
        });
    }
    let mut script = Vec::new();
    for v in 0..n {
        let mut t = rng.random_range(0..5_000);
        let mut awake = false;
        while t < horizon_us {
            script.push(Ev {
                at_us: t,
                vcpu: v,
                act: if awake { Act::Block } else { Act::Wake },
            });
            awake = !awake;
            t += if awake {
                rng.random_range(100..30_000)
            } else {
                rng.random_range(100..15_000)
            };
        }
    }
    for _ in 0..rng.random_range(0..=2) {
        let v = rng.random_range(0..n);
        let period = rng.random_range(2..=40) * 500;
        let budget = rng.random_range(1..=period / 100) * 100;
        script.push(Ev {
            at_us: rng.random_range(0..horizon_us),
            vcpu: v,
            act: Act::Params {
                budget,
                period,
                extra: rng.random_bool(0.5),
            },
        });
    }
    if rng.random_bool(0.3) {
        let p = if policy == SchedPolicy::EDF { SchedPolicy::RM } else { SchedPolicy::EDF };
        script.push(Ev {
            at_us: rng.random_range(0..horizon_us),
            vcpu: 0,
            act: Act::Policy(p),
        });
    }
    script.sort_by_key(|e| e.at_us);
    Instance {
        pcpus,
        policy,
        vcpus,
        script,
        horizon_us,
    }
}

pub fn params(budget: u64, period: u64, extra: bool) -> RtdsParams {
    RtdsParams::new(budget, period, extra).unwrap()
}

pub fn event_driven(inst: &Instance, keep_trace: bool) -> RtdsRun {
    let servers: Vec<(RtdsParams, Vec<usize>)> = inst
        .vcpus
        .iter()
        .map(|v| (params(v.budget, v.period, v.extra), v.affinity.clone()))
        .collect();
    let refs: Vec<(RtdsParams, &[usize])> = servers.iter().map(|(p, a)| (*p, a.as_slice())).collect();
    let sched = rtds::single_pool(inst.pcpus, inst.policy, &refs).unwrap();
    let script = inst
        .script
        .iter()
        .map(|e| ScriptEvent {
            at: SimTime::from_us(e.at_us),
            vcpu: e.vcpu,
            action: match e.act {
                Act::Wake => ScriptAction::Wake,
                Act::Block => ScriptAction::Block,
                Act::Params { budget, period, extra } => ScriptAction::SetParams(params(budget, period, extra)),
                Act::Policy(policy) => ScriptAction::SetPolicy { pool: 0, policy },
            },
        })
        .collect();
    RtdsSim::new(sched, script, keep_trace)
        .unwrap()
        .run(SimTime::from_us(inst.horizon_us))
        .unwrap()
}

/// Event-driven segments in the oracle's `(pcpu, vcpu, extra, start, end)` form.
pub fn as_oracle_segments(run: &RtdsRun) -> Vec<Seg> {
    let mut out: Vec<Seg> = run
        .segments
        .iter()
        .map(|s| {
            assert_eq!(s.start.as_ns() % us(1), 0, "segment start off the us grid");
            assert_eq!(s.end.as_ns() % us(1), 0, "segment end off the us grid");
            (
                s.pcpu,
                s.vcpu,
                s.class == ExecClass::Extra,
                s.start.as_ns() / us(1),
                s.end.as_ns() / us(1),
            )
        })
        .collect();
    out.sort_by_key(|s| (s.0, s.3));
    out
}

pub fn oracle(inst: &Instance) -> Vec<Seg> {
    tick_oracle::run(inst.pcpus, inst.policy, &inst.vcpus, &inst.script, SLICE_US, inst.horizon_us)
}

/// Random single-pCPU server set with total utilization at most 1.
pub fn feasible_set(seed: u64) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5);
    let mut shares: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = shares.iter().sum();
    let target = rng.random_range(0.3..=1.0);
    for s in &mut shares {
        *s *= target / total;
    }
    shares
        .iter()
        .map(|&u| {
            let period = rng.random_range(1..=20) * 1000;
            let budget = ((u * period as f64) as u64).clamp(1, period);
            (budget, period)
        })
        .collect()
}
