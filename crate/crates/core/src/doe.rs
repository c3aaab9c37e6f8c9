//! Design of experiments: factors, full-factorial plans, stress-VM recipes
//! and paired campaign execution.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app::LatencySample;
use crate::guest::GuestPolicy;
use crate::platform::{PlatformSpec, RtdsParams, VCpuSpec, VmRole, VmSpec};
use crate::sim::derive_seed;
use crate::system::{simulate, RunOptions, SystemConfig, SystemError};

pub const STRESS_FACTOR: &str = "stress";
pub const SCHEDULER_FACTOR: &str = "scheduler";
pub const STRESS_VM: &str = "stress";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
}

impl Factor {
    pub fn new(name: &str, levels: &[&str]) -> Self {
        Factor {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlannedRun {
    pub id: String,
    /// `(factor, level)` in factor order.
    pub assignment: Vec<(String, String)>,
}

impl PlannedRun {
    pub fn level(&self, factor: &str) -> Option<&str> {
        self.assignment.iter().find(|(f, _)| f == factor).map(|(_, l)| l.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DesignPlan {
    pub runs: Vec<PlannedRun>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DoeError {
    #[error("no factors given")]
    EmptyFactorList,
    #[error("factor `{0}` has no levels")]
    EmptyLevels(String),
    #[error("factor `{factor}` lists level `{level}` twice")]
    DuplicateLevel { factor: String, level: String },
    #[error("factor `{0}` is defined twice")]
    DuplicateFactor(String),
    #[error("unknown level `{level}` for factor `{factor}`")]
    UnknownLevel { factor: String, level: String },
    #[error("platform does not match the stress recipes: {0}")]
    IncompatiblePlatform(String),
}

/// Cartesian product of the factor levels. The first factor varies slowest;
/// levels keep their listed order. Run ids join upper-cased levels with `_`.
pub fn full_factorial(factors: &[Factor]) -> Result<DesignPlan, DoeError> {
    if factors.is_empty() {
        return Err(DoeError::EmptyFactorList);
    }
    let mut names = BTreeSet::new();
    for f in factors {
        if !names.insert(f.name.as_str()) {
            return Err(DoeError::DuplicateFactor(f.name.clone()));
        }
        if f.levels.is_empty() {
            return Err(DoeError::EmptyLevels(f.name.clone()));
        }
        let mut seen = BTreeSet::new();
        for l in &f.levels {
            if !seen.insert(l.to_uppercase()) {
                return Err(DoeError::DuplicateLevel {
                    factor: f.name.clone(),
                    level: l.clone(),
                });
            }
        }
    }
    let mut runs = vec![Vec::new()];
    for f in factors {
        runs = runs
            .into_iter()
            .flat_map(|prefix: Vec<(String, String)>| {
                f.levels.iter().map(move |l| {
                    let mut a = prefix.clone();
                    a.push((f.name.clone(), l.clone()));
                    a
                })
            })
            .collect();
    }
    Ok(DesignPlan {
        runs: runs
            .into_iter()
            .map(|assignment| PlannedRun {
                id: assignment.iter().map(|(_, l)| l.to_uppercase()).collect::<Vec<_>>().join("_"),
                assignment,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StressLevel {
    Low,
    Mid,
    High,
}

impl StressLevel {
    pub const ALL: [StressLevel; 3] = [StressLevel::Low, StressLevel::Mid, StressLevel::High];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LOW" => Some(StressLevel::Low),
            "MID" => Some(StressLevel::Mid),
            "HIGH" => Some(StressLevel::High),
            _ => None,
        }
    }

    /// Pinning of the stress vCPUs.
    pub fn affinities(self) -> &'static [usize] {
        match self {
            StressLevel::Low => &[6],
            StressLevel::Mid => &[6, 7, 0, 1],
            StressLevel::High => &[2, 3, 4, 5],
        }
    }
}

impl fmt::Display for StressLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StressLevel::Low => "LOW",
            StressLevel::Mid => "MID",
            StressLevel::High => "HIGH",
        })
    }
}

fn single_pin(vm: &VmSpec) -> Vec<Option<usize>> {
    vm.vcpus
        .iter()
        .map(|v| (v.affinity.len() == 1).then(|| *v.affinity.iter().next().unwrap()))
        .collect()
}

/// Checks the PoC shape the recipes refer to.
fn check_poc_shape(platform: &PlatformSpec) -> Result<(), DoeError> {
    let bad = |m: String| Err(DoeError::IncompatiblePlatform(m));
    if platform.pcpu_count < 8 {
        return bad(format!("needs 8 pCPUs, has {}", platform.pcpu_count));
    }
    let pins = |role: VmRole| -> Vec<Option<usize>> { platform.vms_with_role(role).flat_map(single_pin).collect() };
    let expect = |role: VmRole, want: &[usize], what: &str| -> Result<(), DoeError> {
        let got = pins(role);
        let want: Vec<Option<usize>> = want.iter().map(|&p| Some(p)).collect();
        if got != want {
            return Err(DoeError::IncompatiblePlatform(format!("{what} must be pinned to {want:?}, found {got:?}")));
        }
        Ok(())
    };
    expect(VmRole::Privileged, &[0, 1], "pVM")?;
    expect(VmRole::Voter, &[2, 3], "voter")?;
    expect(VmRole::Replica, &[4, 5], "replicas")?;
    if platform.vms_with_role(VmRole::Stress).next().is_some() {
        return bad("a stress VM is already present".into());
    }
    let free = platform.free_pcpus();
    if !(free.contains(&6) && free.contains(&7)) {
        return bad(format!("pCPU6 and pCPU7 must be free, free set is {free:?}"));
    }
    let pool = &platform.vms.iter().find(|v| v.role == VmRole::Privileged).unwrap().pool;
    let covers = platform
        .pools
        .iter()
        .find(|p| &p.name == pool)
        .is_some_and(|p| (0..8).all(|c| p.pcpus.contains(&c)));
    if !covers {
        return bad("pCPUs 0-7 must share the pVM's pool".into());
    }
    Ok(())
}

/// Builds the stress VM for `level` on the PoC platform. Its vCPUs run
/// always-runnable hogs with the given server parameters.
pub fn materialize_stress(level: StressLevel, platform: &PlatformSpec, params: RtdsParams) -> Result<VmSpec, DoeError> {
    check_poc_shape(platform)?;
    let pool = platform.vms.iter().find(|v| v.role == VmRole::Privileged).unwrap().pool.clone();
    Ok(VmSpec {
        name: STRESS_VM.into(),
        role: VmRole::Stress,
        pool,
        vcpus: level
            .affinities()
            .iter()
            .enumerate()
            .map(|(i, &p)| VCpuSpec {
                id: format!("{STRESS_VM}.{i}"),
                params,
                affinity: BTreeSet::from([p]),
            })
            .collect(),
        guest_policy: GuestPolicy::Fifo { prio: 1 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Without,
    With,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Without => "without",
            Arm::With => "with",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "without" => Some(Arm::Without),
            "with" => Some(Arm::With),
            _ => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Guest policies selectable by the scheduler factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerLevels {
    pub fifo_prio: u8,
    pub rr_prio: u8,
    pub deadline_runtime_us: u64,
    pub deadline_us: u64,
    pub deadline_period_us: u64,
}

impl Default for SchedulerLevels {
    fn default() -> Self {
        SchedulerLevels {
            fifo_prio: 80,
            rr_prio: 80,
            deadline_runtime_us: 1_000,
            deadline_us: 10_000,
            deadline_period_us: 10_000,
        }
    }
}

impl SchedulerLevels {
    pub fn policy(&self, level: &str) -> Option<GuestPolicy> {
        match level.to_ascii_uppercase().as_str() {
            "FIFO" => Some(GuestPolicy::Fifo { prio: self.fifo_prio }),
            "RR" => Some(GuestPolicy::Rr { prio: self.rr_prio }),
            "DEADLINE" => Some(GuestPolicy::Deadline {
                runtime_us: self.deadline_runtime_us,
                deadline_us: self.deadline_us,
                period_us: self.deadline_period_us,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    /// Platform, channel, contention and app settings without any stress VM.
    pub base: SystemConfig,
    pub factors: Vec<Factor>,
    pub scheduler: SchedulerLevels,
    pub stress_params: RtdsParams,
    pub seed: u64,
    pub repetitions: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub run_index: usize,
    pub run_id: String,
    pub repetition: u32,
    pub arm: Arm,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub key: CellKey,
    pub seed: u64,
    pub samples: Vec<LatencySample>,
    pub votes: usize,
    pub digest: u64,
    pub trace: Option<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Doe(#[from] DoeError),
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("cell {run_id}/{arm}/rep{repetition}: {source}")]
    Cell {
        run_id: String,
        arm: Arm,
        repetition: u32,
        source: SystemError,
    },
}

impl Campaign {
    /// Three stress levels crossed with FIFO, one repetition.
    pub fn poc(seed: u64, repetitions: u32) -> Self {
        Campaign {
            base: SystemConfig::poc(),
            factors: vec![
                Factor::new(STRESS_FACTOR, &["Low", "Mid", "High"]),
                Factor::new(SCHEDULER_FACTOR, &["FIFO"]),
            ],
            scheduler: SchedulerLevels::default(),
            stress_params: RtdsParams::defaults(true),
            seed,
            repetitions,
        }
    }

    pub fn plan(&self) -> Result<DesignPlan, DoeError> {
        let plan = full_factorial(&self.factors)?;
        for run in &plan.runs {
            self.cell_config(run, Arm::With)?;
        }
        Ok(plan)
    }

    /// Seed of repetition `rep`, shared by every run and arm.
    pub fn repetition_seed(&self, rep: u32) -> u64 {
        derive_seed(self.seed, rep as u64)
    }

    /// Simulation settings of one arm of `run`.
    pub fn cell_config(&self, run: &PlannedRun, arm: Arm) -> Result<SystemConfig, DoeError> {
        let mut cfg = self.base.clone();
        for (factor, level) in &run.assignment {
            match factor.as_str() {
                STRESS_FACTOR => {
                    let lvl = StressLevel::parse(level).ok_or_else(|| DoeError::UnknownLevel {
                        factor: factor.clone(),
                        level: level.clone(),
                    })?;
                    let vm = materialize_stress(lvl, &self.base.platform, self.stress_params)?;
                    if arm == Arm::With {
                        cfg.platform.vms.push(vm);
                    }
                }
                SCHEDULER_FACTOR => {
                    let policy = self.scheduler.policy(level).ok_or_else(|| DoeError::UnknownLevel {
                        factor: factor.clone(),
                        level: level.clone(),
                    })?;
                    for vm in &mut cfg.platform.vms {
                        if matches!(vm.role, VmRole::Replica | VmRole::Voter) {
                            vm.guest_policy = policy;
                        }
                    }
                }
                other => {
                    return Err(DoeError::UnknownLevel {
                        factor: other.into(),
                        level: level.clone(),
                    })
                }
            }
        }
        Ok(cfg)
    }

    /// All cells in key order.
    pub fn cells(&self) -> Result<Vec<(CellKey, PlannedRun)>, CampaignError> {
        if self.repetitions == 0 {
            return Err(CampaignError::NoRepetitions);
        }
        let plan = self.plan()?;
        let mut out = Vec::new();
        for (i, run) in plan.runs.iter().enumerate() {
            for rep in 0..self.repetitions {
                for arm in [Arm::Without, Arm::With] {
                    out.push((
                        CellKey {
                            run_index: i,
                            run_id: run.id.clone(),
                            arm,
                            repetition: rep,
                        },
                        run.clone(),
                    ));
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    pub fn run_cell(&self, key: &CellKey, run: &PlannedRun, opts: RunOptions) -> Result<CellResult, CampaignError> {
        let cfg = self.cell_config(run, key.arm)?;
        let seed = self.repetition_seed(key.repetition);
        let out = simulate(&cfg, seed, opts).map_err(|source| CampaignError::Cell {
            run_id: key.run_id.clone(),
            arm: key.arm,
            repetition: key.repetition,
            source,
        })?;
        Ok(CellResult {
            key: key.clone(),
            seed,
            samples: out.samples,
            votes: out.votes.len(),
            digest: out.trace.digest(),
            trace: out.trace.into_lines(),
        })
    }
}

/// Runs every (run, repetition, arm) cell. Cells are independent; with the
/// `parallel` feature they run on the rayon pool. Results come back in key
/// order either way.
pub fn run_campaign(campaign: &Campaign, opts: RunOptions) -> Result<Vec<CellResult>, CampaignError> {
    let cells = campaign.cells()?;
    #[cfg(feature = "parallel")]
    let results: Vec<Result<CellResult, CampaignError>> = {
        use rayon::prelude::*;
        cells.par_iter().map(|(k, r)| campaign.run_cell(k, r, opts)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<CellResult, CampaignError>> =
        cells.iter().map(|(k, r)| campaign.run_cell(k, r, opts)).collect();
    results.into_iter().collect()
}

/// Differences between two cell configurations, ignoring stress VMs.
/// Empty for a correctly paired run.
pub fn config_diff(a: &SystemConfig, b: &SystemConfig) -> Vec<String> {
    let strip = |c: &SystemConfig| {
        let mut c = c.clone();
        c.platform.vms.retain(|vm| vm.role != VmRole::Stress);
        c
    };
    let (a, b) = (strip(a), strip(b));
    let mut out = Vec::new();
    if a.platform.pcpu_count != b.platform.pcpu_count {
        out.push("pcpu_count".into());
    }
    if a.platform.pools != b.platform.pools {
        out.push("pools".into());
    }
    if a.platform.vms != b.platform.vms {
        out.push("vms".into());
    }
    if a.extra_slice_us != b.extra_slice_us {
        out.push("extra_slice_us".into());
    }
    if a.rr_timeslice_us != b.rr_timeslice_us {
        out.push("rr_timeslice_us".into());
    }
    if a.channel != b.channel {
        out.push("channel".into());
    }
    if a.contention != b.contention {
        out.push("contention".into());
    }
    if a.app != b.app {
        out.push("app".into());
    }
    out
}
