//! Campaign configuration files (TOML).
//!
//! Every section is optional and falls back to the PoC defaults. Unknown keys
//! are rejected. See `configs/poc.toml` for a complete file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app::{AppParams, ChannelModel};
use crate::doe::{full_factorial, Campaign, Factor, SchedulerLevels};
use crate::guest::{GuestPolicy, DEFAULT_RR_TIMESLICE};
use crate::platform::{
    poc_platform, validate_platform, CpuPool, PlatformSpec, RtdsParams, SchedPolicy, VCpuSpec, VmRole, VmSpec,
    DEFAULT_BUDGET_US, DEFAULT_PERIOD_US,
};
use crate::rtds::DEFAULT_EXTRA_SLICE_US;
use crate::sim::ContentionModel;
use crate::stats::TestVariant;
use crate::system::SystemConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub platform: PlatformSection,
    #[serde(default)]
    pub rtds: RtdsSection,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default)]
    pub contention: ContentionSection,
    #[serde(default)]
    pub app: AppParams,
    #[serde(default)]
    pub guest: GuestSection,
    #[serde(default, rename = "factor")]
    pub factors: Vec<Factor>,
    #[serde(default)]
    pub campaign: CampaignSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either `preset = "poc"` (the default) or an explicit pool/VM list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlatformSection {
    pub preset: Option<String>,
    pub pcpus: Option<usize>,
    #[serde(rename = "pool")]
    pub pools: Vec<PoolEntry>,
    #[serde(rename = "vm")]
    pub vms: Vec<VmEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolEntry {
    pub name: String,
    pub pcpus: BTreeSet<usize>,
    #[serde(default = "edf")]
    pub policy: SchedPolicy,
}

fn edf() -> SchedPolicy {
    SchedPolicy::EDF
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmEntry {
    pub name: String,
    pub role: RoleName,
    pub pool: String,
    pub guest: GuestPolicy,
    #[serde(rename = "vcpu")]
    pub vcpus: Vec<VcpuEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleName {
    Privileged,
    Replica,
    Voter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcpuEntry {
    pub id: String,
    pub affinity: BTreeSet<usize>,
    pub budget_us: Option<u64>,
    pub period_us: Option<u64>,
    pub extratime: Option<bool>,
}

/// Server defaults for vCPUs that do not set their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RtdsSection {
    pub budget_us: u64,
    pub period_us: u64,
    pub extratime: bool,
    pub extra_slice_us: u64,
    pub stress_budget_us: u64,
    pub stress_period_us: u64,
    pub stress_extratime: bool,
}

impl Default for RtdsSection {
    fn default() -> Self {
        RtdsSection {
            budget_us: DEFAULT_BUDGET_US,
            period_us: DEFAULT_PERIOD_US,
            extratime: false,
            extra_slice_us: DEFAULT_EXTRA_SLICE_US,
            stress_budget_us: DEFAULT_BUDGET_US,
            stress_period_us: DEFAULT_PERIOD_US,
            stress_extratime: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContentionSection {
    pub enabled: bool,
    pub kappa: f64,
}

impl Default for ContentionSection {
    fn default() -> Self {
        let d = ContentionModel::default();
        ContentionSection {
            enabled: d.enabled,
            kappa: d.kappa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuestSection {
    pub rr_timeslice_us: u64,
    /// Policies used by the scheduler factor levels.
    pub fifo_prio: u8,
    pub rr_prio: u8,
    pub deadline_runtime_us: u64,
    pub deadline_us: u64,
    pub deadline_period_us: u64,
}

impl Default for GuestSection {
    fn default() -> Self {
        let l = SchedulerLevels::default();
        GuestSection {
            rr_timeslice_us: DEFAULT_RR_TIMESLICE / 1000,
            fifo_prio: l.fifo_prio,
            rr_prio: l.rr_prio,
            deadline_runtime_us: l.deadline_runtime_us,
            deadline_us: l.deadline_us,
            deadline_period_us: l.deadline_period_us,
        }
    }
}

impl GuestSection {
    pub fn levels(&self) -> SchedulerLevels {
        SchedulerLevels {
            fifo_prio: self.fifo_prio,
            rr_prio: self.rr_prio,
            deadline_runtime_us: self.deadline_runtime_us,
            deadline_us: self.deadline_us,
            deadline_period_us: self.deadline_period_us,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    pub seed: u64,
    pub repetitions: u32,
}

impl Default for CampaignSection {
    fn default() -> Self {
        CampaignSection { seed: 1, repetitions: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// One merged raw CSV instead of one file per cell.
    pub merged: bool,
    pub test: TestVariant,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            merged: false,
            test: TestVariant::Welch,
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse {
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn default_params(&self, v: &VcpuEntry) -> RtdsParams {
        RtdsParams {
            budget_us: v.budget_us.unwrap_or(self.rtds.budget_us),
            period_us: v.period_us.unwrap_or(self.rtds.period_us),
            extratime: v.extratime.unwrap_or(self.rtds.extratime),
        }
    }

    pub fn platform(&self) -> Result<PlatformSpec, ConfigError> {
        let p = &self.platform;
        let explicit = !p.pools.is_empty() || !p.vms.is_empty() || p.pcpus.is_some();
        let spec = match (p.preset.as_deref(), explicit) {
            (None | Some("poc"), false) => {
                let mut spec = poc_platform();
                let base = RtdsParams {
                    budget_us: self.rtds.budget_us,
                    period_us: self.rtds.period_us,
                    extratime: self.rtds.extratime,
                };
                for vcpu in spec.vms.iter_mut().flat_map(|vm| vm.vcpus.iter_mut()) {
                    vcpu.params = base;
                }
                spec
            }
            (Some(other), false) => return Err(ConfigError::Invalid(format!("unknown platform preset `{other}`"))),
            (Some(_), true) => {
                return Err(ConfigError::Invalid(
                    "platform: give either a preset or pools and VMs, not both".into(),
                ))
            }
            (None, _) => PlatformSpec {
                pcpu_count: p
                    .pcpus
                    .ok_or_else(|| ConfigError::Invalid("platform.pcpus is required without a preset".into()))?,
                pools: p
                    .pools
                    .iter()
                    .map(|e| CpuPool {
                        name: e.name.clone(),
                        pcpus: e.pcpus.clone(),
                        policy: e.policy,
                    })
                    .collect(),
                vms: p
                    .vms
                    .iter()
                    .map(|vm| VmSpec {
                        name: vm.name.clone(),
                        role: match vm.role {
                            RoleName::Privileged => VmRole::Privileged,
                            RoleName::Replica => VmRole::Replica,
                            RoleName::Voter => VmRole::Voter,
                        },
                        pool: vm.pool.clone(),
                        vcpus: vm
                            .vcpus
                            .iter()
                            .map(|v| VCpuSpec {
                                id: v.id.clone(),
                                params: self.default_params(v),
                                affinity: v.affinity.clone(),
                            })
                            .collect(),
                        guest_policy: vm.guest,
                    })
                    .collect(),
            },
        };
        validate_platform(spec).map_err(|errs| {
            ConfigError::Invalid(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))
        })
    }

    fn factors(&self) -> Vec<Factor> {
        if self.factors.is_empty() {
            Campaign::poc(0, 1).factors
        } else {
            self.factors.clone()
        }
    }

    /// Validated campaign described by the file.
    pub fn campaign(&self) -> Result<Campaign, ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        self.app.check().map_err(invalid)?;
        self.channel.check().map_err(invalid)?;
        if !(self.contention.kappa >= 0.0) {
            return Err(invalid("contention.kappa must be non-negative".into()));
        }
        if self.campaign.repetitions == 0 {
            return Err(invalid("campaign.repetitions must be at least 1".into()));
        }
        let stress_params = RtdsParams::new(
            self.rtds.stress_budget_us,
            self.rtds.stress_period_us,
            self.rtds.stress_extratime,
        )
        .map_err(|e| invalid(format!("stress server: {e}")))?;
        let campaign = Campaign {
            base: SystemConfig {
                platform: self.platform()?,
                extra_slice_us: self.rtds.extra_slice_us,
                rr_timeslice_us: self.guest.rr_timeslice_us,
                channel: self.channel,
                contention: ContentionModel {
                    kappa: self.contention.kappa,
                    enabled: self.contention.enabled,
                },
                app: self.app.clone(),
            },
            factors: self.factors(),
            scheduler: self.guest.levels(),
            stress_params,
            seed: self.campaign.seed,
            repetitions: self.campaign.repetitions,
        };
        if self.rtds.extra_slice_us == 0 || self.guest.rr_timeslice_us == 0 {
            return Err(invalid("time slices must be positive".into()));
        }
        full_factorial(&campaign.factors).map_err(|e| invalid(e.to_string()))?;
        campaign.plan().map_err(|e| invalid(e.to_string()))?;
        Ok(campaign)
    }
}
