//! JSON-in, JSON-out wrappers over the core crate.

use serde::{Deserialize, Serialize};

use isolab_core::doe::Campaign;
use isolab_core::platform::{RtdsParams, SchedPolicy};
use isolab_core::report::summarize_cells;
use isolab_core::rtds::{single_pool, ExecClass, RtdsSim, ScriptAction, ScriptEvent};
use isolab_core::sim::ContentionModel;
use isolab_core::stats::{format_p, mean, sample_sd, welch_t_test, DEFAULT_ALPHA};
use isolab_core::system::RunOptions;
use isolab_core::time::SimTime;

const MAX_HORIZON_MS: u64 = 1_000;
const MAX_REPETITIONS: u32 = 50;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanttSpec {
    pub policy: SchedPolicy,
    pub pcpus: usize,
    pub horizon_ms: u64,
    pub vcpus: Vec<GanttVcpu>,
}

/// A vCPU that is busy for `busy_us`, then sleeps `idle_us`, repeatedly.
/// Without `idle_us` it never blocks.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanttVcpu {
    pub budget_us: u64,
    pub period_us: u64,
    #[serde(default)]
    pub extratime: bool,
    pub affinity: Vec<usize>,
    #[serde(default)]
    pub busy_us: Option<u64>,
    #[serde(default)]
    pub idle_us: Option<u64>,
    #[serde(default)]
    pub offset_us: u64,
}

#[derive(Debug, Serialize)]
pub struct GanttSegment {
    pub pcpu: usize,
    pub vcpu: usize,
    pub extra: bool,
    pub start_us: f64,
    pub end_us: f64,
}

#[derive(Debug, Serialize)]
pub struct Gantt {
    pub segments: Vec<GanttSegment>,
    /// Share of the horizon each vCPU ran, budgeted plus extratime.
    pub share: Vec<f64>,
}

pub fn rtds_gantt(spec_json: &str) -> Result<String, String> {
    let spec: GanttSpec = serde_json::from_str(spec_json).map_err(|e| e.to_string())?;
    if spec.horizon_ms == 0 || spec.horizon_ms > MAX_HORIZON_MS {
        return Err(format!("horizon must be 1..={MAX_HORIZON_MS} ms"));
    }
    let params: Vec<RtdsParams> = spec
        .vcpus
        .iter()
        .map(|v| RtdsParams::new(v.budget_us, v.period_us, v.extratime))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let servers: Vec<(RtdsParams, &[usize])> = params.iter().zip(&spec.vcpus).map(|(p, v)| (*p, &v.affinity[..])).collect();
    let sched = single_pool(spec.pcpus, spec.policy, &servers).map_err(|e| e.to_string())?;

    let horizon = SimTime::from_us(spec.horizon_ms * 1000);
    let mut script = Vec::new();
    for (i, v) in spec.vcpus.iter().enumerate() {
        let mut t = v.offset_us;
        loop {
            script.push(ScriptEvent {
                at: SimTime::from_us(t),
                vcpu: i,
                action: ScriptAction::Wake,
            });
            let (Some(busy), Some(idle)) = (v.busy_us, v.idle_us) else { break };
            if busy == 0 || idle == 0 || SimTime::from_us(t + busy) >= horizon {
                break;
            }
            script.push(ScriptEvent {
                at: SimTime::from_us(t + busy),
                vcpu: i,
                action: ScriptAction::Block,
            });
            t += busy + idle;
            if SimTime::from_us(t) >= horizon {
                break;
            }
        }
    }
    script.sort_by_key(|e| e.at);
    let run = RtdsSim::new(sched, script, false)
        .map_err(|e| e.to_string())?
        .run(horizon)
        .map_err(|e| e.to_string())?;

    let mut share = vec![0.0; spec.vcpus.len()];
    let segments = run
        .segments
        .iter()
        .map(|s| {
            share[s.vcpu] += (s.end.since(s.start)) as f64 / horizon.as_ns() as f64;
            GanttSegment {
                pcpu: s.pcpu,
                vcpu: s.vcpu,
                extra: s.class == ExecClass::Extra,
                start_us: s.start.as_us_f64(),
                end_us: s.end.as_us_f64(),
            }
        })
        .collect();
    serde_json::to_string(&Gantt { segments, share }).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct CampaignOut {
    pub header: Vec<String>,
    pub rows: Vec<[String; 9]>,
    pub text: String,
}

pub fn campaign(kappa: f64, seed: u64, repetitions: u32, samples: u32) -> Result<String, String> {
    if !(1..=MAX_REPETITIONS).contains(&repetitions) {
        return Err(format!("repetitions must be 1..={MAX_REPETITIONS}"));
    }
    if !(kappa >= 0.0) {
        return Err("kappa must be non-negative".into());
    }
    let mut c = Campaign::poc(seed, repetitions);
    c.base.contention = ContentionModel::with_kappa(kappa);
    c.base.app.samples = samples;
    c.base.app.check()?;
    let cells = isolab_core::doe::run_campaign(&c, RunOptions::default()).map_err(|e| e.to_string())?;
    let summary = summarize_cells(&cells, Default::default()).map_err(|e| e.to_string())?;
    let out = CampaignOut {
        header: isolab_core::report::SUMMARY_HEADER.iter().map(|s| s.to_string()).collect(),
        rows: summary.rows.iter().map(|r| r.cells()).collect(),
        text: summary.to_text(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: `{t}`")))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct WelchOut {
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub p_text: String,
    pub significant: bool,
}

pub fn welch(a: &str, b: &str) -> Result<String, String> {
    let (a, b) = (parse_list(a)?, parse_list(b)?);
    let r = welch_t_test(&a, &b, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
    let out = WelchOut {
        mean_a: mean(&a).map_err(|e| e.to_string())?,
        mean_b: mean(&b).map_err(|e| e.to_string())?,
        sd_a: sample_sd(&a).map_err(|e| e.to_string())?,
        sd_b: sample_sd(&b).map_err(|e| e.to_string())?,
        t: r.t,
        df: r.df,
        p: r.p,
        p_text: format_p(r.p),
        significant: r.significant,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}
