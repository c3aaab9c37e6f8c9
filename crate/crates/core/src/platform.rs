//! Static description of the simulated machine: pCPUs, CPU pools, VMs and
//! their vCPUs with RTDS server parameters and pinnings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guest::GuestPolicy;
use crate::time::{us, Nanos};

/// RTDS default budget used by the PoC deployment.
pub const DEFAULT_BUDGET_US: u64 = 4_000;
/// RTDS default period used by the PoC deployment.
pub const DEFAULT_PERIOD_US: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchedPolicy {
    #[serde(alias = "edf", alias = "Edf")]
    EDF,
    #[serde(alias = "rm", alias = "Rm")]
    RM,
}

impl fmt::Display for SchedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedPolicy::EDF => f.write_str("EDF"),
            SchedPolicy::RM => f.write_str("RM"),
        }
    }
}

/// Per-vCPU deferrable-server parameters, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RtdsParams {
    pub budget_us: u64,
    pub period_us: u64,
    pub extratime: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("period must be positive")]
    ZeroPeriod,
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("budget {budget_us}us exceeds period {period_us}us")]
    BudgetExceedsPeriod { budget_us: u64, period_us: u64 },
}

impl RtdsParams {
    pub fn new(budget_us: u64, period_us: u64, extratime: bool) -> Result<Self, ParamsError> {
        let params = RtdsParams {
            budget_us,
            period_us,
            extratime,
        };
        params.check()?;
        Ok(params)
    }

    pub fn defaults(extratime: bool) -> Self {
        RtdsParams {
            budget_us: DEFAULT_BUDGET_US,
            period_us: DEFAULT_PERIOD_US,
            extratime,
        }
    }

    pub fn check(&self) -> Result<(), ParamsError> {
        if self.period_us == 0 {
            return Err(ParamsError::ZeroPeriod);
        }
        if self.budget_us == 0 {
            return Err(ParamsError::ZeroBudget);
        }
        if self.budget_us > self.period_us {
            return Err(ParamsError::BudgetExceedsPeriod {
                budget_us: self.budget_us,
                period_us: self.period_us,
            });
        }
        Ok(())
    }

    pub fn budget_ns(&self) -> Nanos {
        us(self.budget_us)
    }

    pub fn period_ns(&self) -> Nanos {
        us(self.period_us)
    }

    pub fn utilization(&self) -> f64 {
        self.budget_us as f64 / self.period_us as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpuPool {
    pub name: String,
    pub pcpus: BTreeSet<usize>,
    pub policy: SchedPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VmRole {
    Privileged,
    Replica,
    Voter,
    Stress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VCpuSpec {
    pub id: String,
    pub params: RtdsParams,
    pub affinity: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmSpec {
    pub name: String,
    pub role: VmRole,
    /// Pool the VM is assigned to.
    pub pool: String,
    pub vcpus: Vec<VCpuSpec>,
    pub guest_policy: GuestPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub pcpu_count: usize,
    pub pools: Vec<CpuPool>,
    pub vms: Vec<VmSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlatformError {
    #[error("platform has no pCPUs")]
    NoPcpus,
    #[error("pool {pool} has no pCPUs")]
    EmptyPool { pool: String },
    #[error("pool {pool} names pCPU{pcpu} which does not exist")]
    PcpuOutOfRange { pool: String, pcpu: usize },
    #[error("pCPU{pcpu} belongs to more than one pool")]
    PoolOverlap { pcpu: usize },
    #[error("pCPU{pcpu} belongs to no pool")]
    UnpooledPcpu { pcpu: usize },
    #[error("duplicate pool name {0}")]
    DuplicatePool(String),
    #[error("VM {vm} refers to unknown pool {pool}")]
    UnknownPool { vm: String, pool: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("vCPU {vcpu} has no usable pCPU in pool {pool}")]
    EmptyAffinity { vcpu: String, pool: String },
    #[error("vCPU {vcpu} is pinned to pCPU{pcpu} outside pool {pool}")]
    AffinityOutsidePool {
        vcpu: String,
        pool: String,
        pcpu: usize,
    },
    #[error("vCPU {vcpu}: budget {budget_us}us exceeds period {period_us}us")]
    BudgetExceedsPeriod {
        vcpu: String,
        budget_us: u64,
        period_us: u64,
    },
    #[error("vCPU {vcpu}: {source}")]
    InvalidParams { vcpu: String, source: ParamsError },
    #[error("VM {vm} has no vCPUs")]
    NoVcpus { vm: String },
    #[error("expected exactly one privileged VM, found {0}")]
    PrivilegedCount(usize),
    #[error("invalid guest policy for VM {vm}: {reason}")]
    GuestPolicy { vm: String, reason: String },
}

/// Checks every structural invariant of `spec`.
///
/// Returns the spec unchanged when valid, otherwise every violation found.
pub fn validate_platform(spec: PlatformSpec) -> Result<PlatformSpec, Vec<PlatformError>> {
    let mut errors = Vec::new();
    if spec.pcpu_count == 0 {
        errors.push(PlatformError::NoPcpus);
    }

    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pool_names = BTreeSet::new();
    for (idx, pool) in spec.pools.iter().enumerate() {
        if !pool_names.insert(pool.name.as_str()) {
            errors.push(PlatformError::DuplicatePool(pool.name.clone()));
        }
        if pool.pcpus.is_empty() {
            errors.push(PlatformError::EmptyPool {
                pool: pool.name.clone(),
            });
        }
        for &p in &pool.pcpus {
            if p >= spec.pcpu_count {
                errors.push(PlatformError::PcpuOutOfRange {
                    pool: pool.name.clone(),
                    pcpu: p,
                });
            } else if owner.insert(p, idx).is_some() {
                errors.push(PlatformError::PoolOverlap { pcpu: p });
            }
        }
    }
    for p in 0..spec.pcpu_count {
        if !owner.contains_key(&p) {
            errors.push(PlatformError::UnpooledPcpu { pcpu: p });
        }
    }

    let mut ids = BTreeSet::new();
    let mut privileged = 0;
    for vm in &spec.vms {
        if !ids.insert(vm.name.clone()) {
            errors.push(PlatformError::DuplicateId(vm.name.clone()));
        }
        if vm.role == VmRole::Privileged {
            privileged += 1;
        }
        if vm.vcpus.is_empty() {
            errors.push(PlatformError::NoVcpus {
                vm: vm.name.clone(),
            });
        }
        if let Err(reason) = vm.guest_policy.check() {
            errors.push(PlatformError::GuestPolicy {
                vm: vm.name.clone(),
                reason,
            });
        }
        let pool = spec.pools.iter().find(|p| p.name == vm.pool);
        if pool.is_none() {
            errors.push(PlatformError::UnknownPool {
                vm: vm.name.clone(),
                pool: vm.pool.clone(),
            });
        }
        for vcpu in &vm.vcpus {
            if !ids.insert(vcpu.id.clone()) {
                errors.push(PlatformError::DuplicateId(vcpu.id.clone()));
            }
            match vcpu.params.check() {
                Ok(()) => {}
                Err(ParamsError::BudgetExceedsPeriod {
                    budget_us,
                    period_us,
                }) => errors.push(PlatformError::BudgetExceedsPeriod {
                    vcpu: vcpu.id.clone(),
                    budget_us,
                    period_us,
                }),
                Err(source) => errors.push(PlatformError::InvalidParams {
                    vcpu: vcpu.id.clone(),
                    source,
                }),
            }
            if let Some(pool) = pool {
                let usable = vcpu.affinity.intersection(&pool.pcpus).count();
                if usable == 0 {
                    errors.push(PlatformError::EmptyAffinity {
                        vcpu: vcpu.id.clone(),
                        pool: pool.name.clone(),
                    });
                } else if let Some(&p) = vcpu.affinity.iter().find(|p| !pool.pcpus.contains(p)) {
                    errors.push(PlatformError::AffinityOutsidePool {
                        vcpu: vcpu.id.clone(),
                        pool: pool.name.clone(),
                        pcpu: p,
                    });
                }
            }
        }
    }
    if privileged != 1 {
        errors.push(PlatformError::PrivilegedCount(privileged));
    }

    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(errors)
    }
}

fn pinned(id: &str, pcpu: usize, extratime: bool) -> VCpuSpec {
    VCpuSpec {
        id: id.to_string(),
        params: RtdsParams::defaults(extratime),
        affinity: BTreeSet::from([pcpu]),
    }
}

/// The PoC baseline: 8 pCPUs in one EDF pool, pVM on pCPU0/1, voter on
/// pCPU2/3, one replica VM on each of pCPU4 and pCPU5. pCPU6 and pCPU7 stay
/// free. Every vCPU runs with the default 4000/10000 us server.
pub fn poc_platform() -> PlatformSpec {
    let vm = |name: &str, role, vcpus: Vec<VCpuSpec>, guest_policy| VmSpec {
        name: name.to_string(),
        role,
        pool: "pool0".to_string(),
        vcpus,
        guest_policy,
    };
    PlatformSpec {
        pcpu_count: 8,
        pools: vec![CpuPool {
            name: "pool0".to_string(),
            pcpus: (0..8).collect(),
            policy: SchedPolicy::EDF,
        }],
        vms: vec![
            vm(
                "pvm",
                VmRole::Privileged,
                vec![pinned("pvm.0", 0, false), pinned("pvm.1", 1, false)],
                GuestPolicy::Fifo { prio: 90 },
            ),
            vm(
                "voter",
                VmRole::Voter,
                vec![pinned("voter.0", 2, false), pinned("voter.1", 3, false)],
                GuestPolicy::Fifo { prio: 80 },
            ),
            vm(
                "replica1",
                VmRole::Replica,
                vec![pinned("replica1.0", 4, false)],
                GuestPolicy::Fifo { prio: 80 },
            ),
            vm(
                "replica2",
                VmRole::Replica,
                vec![pinned("replica2.0", 5, false)],
                GuestPolicy::Fifo { prio: 80 },
            ),
        ],
    }
}

impl PlatformSpec {
    /// pCPUs that appear in no vCPU's affinity.
    pub fn free_pcpus(&self) -> BTreeSet<usize> {
        let used: BTreeSet<usize> = self
            .vms
            .iter()
            .flat_map(|vm| vm.vcpus.iter())
            .flat_map(|v| v.affinity.iter().copied())
            .collect();
        (0..self.pcpu_count).filter(|p| !used.contains(p)).collect()
    }

    /// Per-pCPU utilization from vCPUs pinned solely to that pCPU.
    pub fn pcpu_utilization(&self) -> Vec<f64> {
        let mut util = vec![0.0; self.pcpu_count];
        for vcpu in self.vms.iter().flat_map(|vm| vm.vcpus.iter()) {
            if vcpu.affinity.len() == 1 {
                let p = *vcpu.affinity.iter().next().unwrap();
                if p < util.len() {
                    util[p] += vcpu.params.utilization();
                }
            }
        }
        util
    }

    /// pCPUs pinned by the VMs with the given role.
    pub fn pcpus_of_role(&self, role: VmRole) -> BTreeSet<usize> {
        self.vms
            .iter()
            .filter(|vm| vm.role == role)
            .flat_map(|vm| vm.vcpus.iter())
            .flat_map(|v| v.affinity.iter().copied())
            .collect()
    }

    pub fn vms_with_role(&self, role: VmRole) -> impl Iterator<Item = &VmSpec> {
        self.vms.iter().filter(move |vm| vm.role == role)
    }

    pub fn vcpu_count(&self) -> usize {
        self.vms.iter().map(|vm| vm.vcpus.len()).sum()
    }
}
