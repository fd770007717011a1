//! Slice assurance: SLA violation detection and CPU quota control for pools
//! whose data-plane NFs want more CPU than the pool can give.
//!
//! Under contention each slice gets CPU in proportion to
//! `priority * tp_min_mbps`, capped at what it needs for `tp_min_mbps`
//! (or less, if it offers less traffic). Capped slices return their excess
//! to the others. A slice's CPU is then split between its NFs so that both
//! carry the same throughput.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compute::{ComputeModel, NfQuotas};
use crate::model::{CellConfig, PoolId, SliceId, SliceIntent, Topology};
use crate::placement::Placement;
use crate::radio::{self, PrbShare};
use crate::sim::MetricsFrame;

const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssuranceConfig {
    /// Whether the loop runs from t = 0. Can be flipped by events.
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_period")]
    pub control_period_ms: u64,
}

fn default_period() -> u64 {
    1000
}

impl Default for AssuranceConfig {
    fn default() -> Self {
        AssuranceConfig {
            enabled: false,
            control_period_ms: default_period(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssuranceError {
    #[error("metrics mention slice {0} with no known intent")]
    UnknownSlice(SliceId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSla {
    pub slice: SliceId,
    pub achieved_mbps: f64,
    pub rtt_ms: f64,
    /// `max(0, 1 - achieved / reference) * 100` where the reference is
    /// `tp_min_mbps`, or the offered load when that is lower.
    pub tp_violation_pct: f64,
    pub delay_violated: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlaReport {
    pub slices: Vec<SliceSla>,
}

impl SlaReport {
    pub fn any_violation(&self) -> bool {
        self.slices.iter().any(|s| s.tp_violation_pct > 0.0 || s.delay_violated)
    }

    pub fn get(&self, slice: SliceId) -> Option<&SliceSla> {
        self.slices.iter().find(|s| s.slice == slice)
    }
}

/// Throughput shortfall as a percentage of `reference_mbps`.
pub fn violation_pct(achieved_mbps: f64, reference_mbps: f64) -> f64 {
    if reference_mbps <= 0.0 {
        return 0.0;
    }
    ((1.0 - achieved_mbps / reference_mbps) * 100.0).clamp(0.0, 100.0)
}

pub fn sla_for(intent: &SliceIntent, achieved_mbps: f64, demand_mbps: f64, rtt_ms: f64) -> SliceSla {
    SliceSla {
        slice: intent.id(),
        achieved_mbps,
        rtt_ms,
        tp_violation_pct: violation_pct(achieved_mbps, intent.tp_min_mbps.min(demand_mbps)),
        delay_violated: rtt_ms > intent.delay_max_ms,
    }
}

/// SLA report for every slice in a frame.
pub fn detect(frame: &MetricsFrame, intents: &BTreeMap<SliceId, SliceIntent>) -> Result<SlaReport, AssuranceError> {
    let slices = frame
        .slices
        .iter()
        .map(|m| {
            let intent = intents.get(&m.slice).ok_or(AssuranceError::UnknownSlice(m.slice))?;
            Ok(sla_for(intent, m.achieved_mbps, m.demand_mbps, m.rtt_ms))
        })
        .collect::<Result<_, _>>()?;
    Ok(SlaReport { slices })
}

/// A slice as seen from one pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSlice {
    pub slice: SliceId,
    pub priority: u32,
    pub tp_min_mbps: f64,
    /// Throughput the slice could use right now; never plan above it.
    pub cap_mbps: f64,
    pub has_cuup: bool,
    pub has_upf: bool,
}

impl PoolSlice {
    pub fn colocated(intent: &SliceIntent, cap_mbps: f64) -> Self {
        PoolSlice {
            slice: intent.id(),
            priority: intent.priority,
            tp_min_mbps: intent.tp_min_mbps,
            cap_mbps,
            has_cuup: true,
            has_upf: true,
        }
    }

    fn nf_count(&self) -> usize {
        usize::from(self.has_cuup) + usize::from(self.has_upf)
    }

    /// This pool's share of the slice's quotas at `mbps`.
    fn quotas_at(&self, compute: &ComputeModel, mbps: f64) -> NfQuotas {
        let full = compute.slice_cpu_demand(mbps);
        NfQuotas {
            cuup_ms: if self.has_cuup { full.cuup_ms } else { 0.0 },
            upf_ms: if self.has_upf { full.upf_ms } else { 0.0 },
        }
    }

    fn cpu_at(&self, compute: &ComputeModel, mbps: f64) -> f64 {
        self.quotas_at(compute, mbps).total()
    }

    fn weight(&self) -> f64 {
        f64::from(self.priority) * self.tp_min_mbps
    }
}

/// Planned throughput and the quotas that realise it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotaPlan {
    pub target_mbps: f64,
    pub quotas: NfQuotas,
}

/// Splits `budget_ms` of pool CPU among contending slices.
///
/// If the budget covers every slice's guaranteed demand, each gets exactly
/// that and the remainder stays unallocated.
pub fn rebalance(slices: &[PoolSlice], compute: &ComputeModel, budget_ms: f64) -> BTreeMap<SliceId, QuotaPlan> {
    let budget = budget_ms.max(0.0);
    let targets: Vec<f64> = slices.iter().map(|s| s.tp_min_mbps.min(s.cap_mbps).max(0.0)).collect();
    let needs: Vec<f64> = slices.iter().zip(&targets).map(|(s, &t)| s.cpu_at(compute, t)).collect();

    let cpu = if needs.iter().sum::<f64>() <= budget {
        needs.clone()
    } else {
        weighted_fill(slices, &needs, budget)
    };

    slices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let target = if cpu[i] >= needs[i] {
                targets[i]
            } else {
                max_throughput_within(s, compute, cpu[i], targets[i])
            };
            (
                s.slice,
                QuotaPlan {
                    target_mbps: target,
                    quotas: s.quotas_at(compute, target),
                },
            )
        })
        .collect()
}

/// CPU per slice: proportional to weight, capped at need, with capped
/// slices' excess handed back to the rest.
fn weighted_fill(slices: &[PoolSlice], needs: &[f64], budget: f64) -> Vec<f64> {
    let mut cpu = vec![0.0; slices.len()];
    // Zero-weight or zero-need slices take nothing from the pool.
    let mut order: Vec<usize> = (0..slices.len())
        .filter(|&i| needs[i] > 0.0 && slices[i].weight() > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        (needs[a] / slices[a].weight())
            .total_cmp(&(needs[b] / slices[b].weight()))
            .then(slices[a].slice.cmp(&slices[b].slice))
    });
    let mut left = budget;
    let mut weight_left: f64 = order.iter().map(|&i| slices[i].weight()).sum();
    for (k, &i) in order.iter().enumerate() {
        let share = slices[i].weight() / weight_left * left;
        if needs[i] <= share {
            cpu[i] = needs[i];
            left -= needs[i];
            weight_left -= slices[i].weight();
        } else {
            for &j in &order[k..] {
                cpu[j] = slices[j].weight() / weight_left * left;
            }
            break;
        }
    }
    cpu
}

/// Largest throughput in `[0, upper]` whose in-pool CPU fits `cpu_ms`.
fn max_throughput_within(s: &PoolSlice, compute: &ComputeModel, cpu_ms: f64, upper: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, upper);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if s.cpu_at(compute, mid) <= cpu_ms {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// What an unmanaged OS scheduler does: every data-plane NF in the pool gets
/// the same slice of the budget.
pub fn fair_share_baseline(slices: &[PoolSlice], budget_ms: f64) -> BTreeMap<SliceId, NfQuotas> {
    let nfs: usize = slices.iter().map(PoolSlice::nf_count).sum();
    let each = if nfs == 0 { 0.0 } else { budget_ms.max(0.0) / nfs as f64 };
    slices
        .iter()
        .map(|s| {
            (
                s.slice,
                NfQuotas {
                    cuup_ms: if s.has_cuup { each } else { 0.0 },
                    upf_ms: if s.has_upf { each } else { 0.0 },
                },
            )
        })
        .collect()
}

/// PRB floor and cap pushed to the radio scheduler for one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrbPolicy {
    pub slice: SliceId,
    pub floor: u32,
    pub cap: f64,
}

impl PrbPolicy {
    pub fn for_intent(intent: &SliceIntent, cell: &CellConfig) -> Result<Self, radio::RadioError> {
        Ok(PrbPolicy {
            slice: intent.id(),
            floor: radio::min_prbs(intent.tp_min_mbps, cell)?,
            cap: radio::max_prbs(intent.tp_max_mbps, cell),
        })
    }

    pub fn share(&self) -> PrbShare {
        PrbShare {
            floor: f64::from(self.floor),
            cap: self.cap,
        }
    }
}

/// Policies currently in force, keyed by slice.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyTable {
    policies: BTreeMap<SliceId, PrbPolicy>,
}

impl PolicyTable {
    pub fn get(&self, slice: SliceId) -> Option<&PrbPolicy> {
        self.policies.get(&slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PrbPolicy> {
        self.policies.values()
    }

    /// Brings the table in line with `intents` and returns the policies that
    /// changed or appeared.
    pub fn sync<'a>(
        &mut self,
        intents: impl IntoIterator<Item = &'a SliceIntent>,
        cell: &CellConfig,
    ) -> Vec<PrbPolicy> {
        let mut seen = BTreeSet::new();
        let mut changed = Vec::new();
        for intent in intents {
            seen.insert(intent.id());
            // Admission already rejected unsatisfiable floors.
            let Ok(p) = PrbPolicy::for_intent(intent, cell) else { continue };
            if self.policies.get(&p.slice) != Some(&p) {
                self.policies.insert(p.slice, p);
                changed.push(p);
            }
        }
        self.policies.retain(|id, _| seen.contains(id));
        changed
    }
}

/// A slice under assurance control.
#[derive(Debug, Clone, PartialEq)]
pub struct ManagedSlice<'a> {
    pub intent: &'a SliceIntent,
    pub placement: &'a Placement,
    /// Throughput the slice could carry if CPU were unlimited.
    pub wanted_mbps: f64,
}

pub struct TickInput<'a> {
    pub slices: &'a [ManagedSlice<'a>],
    pub topology: &'a Topology,
    pub compute: &'a ComputeModel,
    pub cell: &'a CellConfig,
    /// Frame sampled on the previous tick, if any.
    pub last_frame: Option<&'a MetricsFrame>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickOutput {
    pub quota_updates: Vec<(SliceId, NfQuotas)>,
    pub policy_updates: Vec<PrbPolicy>,
    pub report: SlaReport,
}

impl TickOutput {
    pub fn is_empty(&self) -> bool {
        self.quota_updates.is_empty() && self.policy_updates.is_empty()
    }
}

/// Per-pool slices for a set of managed slices.
pub fn pool_members(slices: &[ManagedSlice<'_>]) -> BTreeMap<PoolId, Vec<PoolSlice>> {
    let mut pools: BTreeMap<PoolId, Vec<PoolSlice>> = BTreeMap::new();
    for s in slices {
        let p = s.placement;
        let mut add = |pool: &PoolId, cuup: bool, upf: bool| {
            pools.entry(pool.clone()).or_default().push(PoolSlice {
                slice: s.intent.id(),
                priority: s.intent.priority,
                tp_min_mbps: s.intent.tp_min_mbps,
                cap_mbps: s.wanted_mbps,
                has_cuup: cuup,
                has_upf: upf,
            });
        };
        if p.pool_cuup == p.pool_upf {
            add(&p.pool_cuup, true, true);
        } else {
            add(&p.pool_cuup, true, false);
            add(&p.pool_upf, false, true);
        }
    }
    pools
}

/// The compute-quota control loop. Remembers what it last issued so repeated
/// ticks on an unchanged network are silent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssuranceLoop {
    issued: BTreeMap<SliceId, NfQuotas>,
}

impl AssuranceLoop {
    pub fn issued(&self) -> &BTreeMap<SliceId, NfQuotas> {
        &self.issued
    }

    /// Desired quotas for every slice, without touching loop state.
    pub fn plan(slices: &[ManagedSlice<'_>], topology: &Topology, compute: &ComputeModel) -> BTreeMap<SliceId, NfQuotas> {
        let mut tp: BTreeMap<SliceId, f64> = slices.iter().map(|s| (s.intent.id(), s.wanted_mbps)).collect();
        for (pool, members) in pool_members(slices) {
            let budget = topology.pool(&pool).map(|p| p.dataplane_budget_ms()).unwrap_or(0.0);
            let wanted: f64 = members.iter().map(|m| m.cpu_at(compute, m.cap_mbps)).sum();
            if wanted <= budget {
                continue;
            }
            for (id, plan) in rebalance(&members, compute, budget) {
                let t = tp.get_mut(&id).expect("member of a known slice");
                *t = t.min(plan.target_mbps);
            }
        }
        tp.into_iter().map(|(id, t)| (id, compute.slice_cpu_demand(t))).collect()
    }

    /// One control period: report on the last frame, re-plan quotas, and
    /// re-sync PRB policies. Only changes are returned.
    pub fn tick(&mut self, input: &TickInput<'_>, policies: &mut PolicyTable) -> TickOutput {
        let intents: BTreeMap<SliceId, SliceIntent> =
            input.slices.iter().map(|s| (s.intent.id(), s.intent.clone())).collect();
        let report = input
            .last_frame
            .map(|f| {
                // Slices that left since the frame was taken are skipped.
                let mut frame = f.clone();
                frame.slices.retain(|m| intents.contains_key(&m.slice));
                detect(&frame, &intents).unwrap_or_default()
            })
            .unwrap_or_default();

        let plan = Self::plan(input.slices, input.topology, input.compute);
        let mut quota_updates = Vec::new();
        for (id, q) in &plan {
            if self.issued.get(id) != Some(q) {
                quota_updates.push((*id, *q));
            }
        }
        self.issued = plan;

        let policy_updates = policies.sync(input.slices.iter().map(|s| s.intent), input.cell);
        TickOutput {
            quota_updates,
            policy_updates,
            report,
        }
    }
}
