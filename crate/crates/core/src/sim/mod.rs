//! Deterministic tick-driven simulator.
//!
//! Every tick the engine applies due events, shares the cell's PRBs,
//! decides CPU quotas (assurance loop or unmanaged fair share), and samples a
//! [`MetricsFrame`]. Throughput is a fluid rate: a slice gets the smallest of
//! its radio bound, its two NF compute bounds, its offered load and its peak.

mod export;
mod frame;
mod log;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

pub use export::{frames_csv, write_frames_csv, write_jsonl};
pub use frame::{validate_frame, MetricsFrame, PoolMetrics, SliceMetrics};
pub use log::{LogEntry, LogRecord, RejectReason};

use crate::assurance::{self, AssuranceLoop, ManagedSlice, PolicyTable, PoolSlice, TickInput};
use crate::compute::{accrue_cost, ComputeModel, NfCharge, NfQuotas};
use crate::model::{validate_transition, CellConfig, Lifecycle, SliceId, SliceIntent, SliceState, Topology};
use crate::placement::{self, Placement, PlacementError, PlacementInput, Residual};
use crate::radio::{self, PrbShare, RadioError};
pub use crate::scenario::{SimEvent, TimedEvent};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineOptions {
    /// Keep the assurance loop off regardless of scenario and toggle events.
    pub disable_assurance: bool,
    /// Keep ticking past the scenario horizon (live sessions).
    pub unbounded: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct ActiveSlice {
    state: SliceState,
    demand_mbps: f64,
    /// Last quotas pushed over O1, or the admission quotas.
    issued: NfQuotas,
}

impl ActiveSlice {
    fn placement(&self) -> &Placement {
        self.state.placement.as_ref().expect("active slices are placed")
    }
}

/// Result of applying one event.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Admitted(Placement),
    Stopped(SliceId),
    Applied,
    Rejected { slice: SliceId, reason: RejectReason },
}

/// Outcome of a what-if placement query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
}

/// What a replayed control log must agree with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlState {
    pub intent: SliceIntent,
    pub lifecycle: Lifecycle,
    pub placement: Placement,
    pub quotas: NfQuotas,
    pub prb_floor: u32,
    pub prb_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub frame: MetricsFrame,
    pub records: Vec<LogRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub frames: Vec<MetricsFrame>,
    pub log: Vec<LogRecord>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    topology: Topology,
    cell: CellConfig,
    compute: ComputeModel,
    tick_ms: u64,
    horizon_ms: u64,
    control_period_ms: u64,
    options: EngineOptions,

    now_ms: u64,
    pending: VecDeque<TimedEvent>,
    slices: BTreeMap<SliceId, ActiveSlice>,
    policies: PolicyTable,
    assurance: AssuranceLoop,
    assurance_enabled: bool,
    last_control_ms: Option<u64>,
    control_due: bool,
    cumulative_cost: f64,
    next_seq: u64,
    next_frame: u64,
    last_frame: Option<MetricsFrame>,
    staged: Vec<LogRecord>,
}

impl Engine {
    pub fn new(scenario: &Scenario, options: EngineOptions) -> Self {
        Engine {
            topology: scenario.topology.clone(),
            cell: scenario.cell.clone(),
            compute: scenario.compute.clone(),
            tick_ms: scenario.tick_ms,
            horizon_ms: scenario.horizon_ms,
            control_period_ms: scenario.assurance.control_period_ms,
            options,
            now_ms: 0,
            pending: scenario.events.iter().cloned().collect(),
            slices: BTreeMap::new(),
            policies: PolicyTable::default(),
            assurance: AssuranceLoop::default(),
            assurance_enabled: scenario.assurance.enabled && !options.disable_assurance,
            last_control_ms: None,
            control_due: true,
            cumulative_cost: 0.0,
            next_seq: 0,
            next_frame: 0,
            last_frame: None,
            staged: Vec::new(),
        }
    }

    /// Runs a scenario to its horizon. A scenario without events yields no
    /// frames.
    pub fn run(scenario: &Scenario, options: EngineOptions) -> RunOutput {
        let mut out = RunOutput::default();
        if scenario.events.is_empty() {
            return out;
        }
        let mut engine = Engine::new(scenario, EngineOptions { unbounded: false, ..options });
        while let Some(step) = engine.step() {
            out.log.extend(step.records);
            out.frames.push(step.frame);
        }
        out
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    pub fn is_finished(&self) -> bool {
        !self.options.unbounded && self.now_ms >= self.horizon_ms
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn cell(&self) -> &CellConfig {
        &self.cell
    }

    pub fn compute(&self) -> &ComputeModel {
        &self.compute
    }

    pub fn assurance_enabled(&self) -> bool {
        self.assurance_enabled
    }

    pub fn last_frame(&self) -> Option<&MetricsFrame> {
        self.last_frame.as_ref()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn slice_states(&self) -> impl Iterator<Item = &SliceState> {
        self.slices.values().map(|s| &s.state)
    }

    pub fn intent(&self, id: SliceId) -> Option<&SliceIntent> {
        self.slices.get(&id).map(|s| &s.state.intent)
    }

    /// Guaranteed capacity still free in each pool.
    pub fn residual(&self) -> Residual {
        Residual::after(&self.topology, self.slices.values().map(ActiveSlice::placement))
    }

    pub fn control_state(&self) -> BTreeMap<SliceId, ControlState> {
        self.slices
            .iter()
            .map(|(id, s)| {
                let policy = self.policies.get(*id);
                (
                    *id,
                    ControlState {
                        intent: s.state.intent.clone(),
                        lifecycle: s.state.lifecycle,
                        placement: s.placement().clone(),
                        quotas: s.issued,
                        prb_floor: policy.map_or(0, |p| p.floor),
                        prb_cap: policy.map_or(0.0, |p| p.cap),
                    },
                )
            })
            .collect()
    }

    /// Queues an event for a later tick. Events at or before the current
    /// time are applied on the next step.
    pub fn schedule(&mut self, event: TimedEvent) {
        let pos = self.pending.partition_point(|e| e.t_ms <= event.t_ms);
        self.pending.insert(pos, event);
    }

    /// Applies an event right now and returns its outcome with the records
    /// it produced.
    pub fn apply(&mut self, event: SimEvent) -> (Outcome, Vec<LogRecord>) {
        let outcome = self.apply_event(event);
        (outcome, std::mem::take(&mut self.staged))
    }

    /// Predicted placement for `intent` against the current residual, with
    /// no effect on state.
    pub fn whatif(&self, intent: &SliceIntent) -> WhatIf {
        match self.admission_placement(intent) {
            Ok(p) => WhatIf {
                feasible: true,
                placement: Some(p),
                reason: None,
            },
            Err(reason) => WhatIf {
                feasible: false,
                placement: None,
                reason: Some(reason),
            },
        }
    }

    fn log(&mut self, entry: LogEntry) {
        self.staged.push(LogRecord {
            seq: self.next_seq,
            t_ms: self.now_ms,
            entry,
        });
        self.next_seq += 1;
    }

    fn reject(&mut self, slice: SliceId, intent: Option<SliceIntent>, reason: RejectReason) -> Outcome {
        self.log(LogEntry::SliceRejected {
            slice,
            intent,
            reason: reason.clone(),
        });
        Outcome::Rejected { slice, reason }
    }

    /// Placement plus radio admission, without mutating anything.
    fn admission_placement(&self, intent: &SliceIntent) -> Result<Placement, RejectReason> {
        intent.validate().map_err(|e| RejectReason::Malformed(e.to_string()))?;
        let residual = self.residual();
        let input = PlacementInput {
            intent,
            topology: &self.topology,
            compute: &self.compute,
            cell: &self.cell,
            residual: &residual,
        };
        let placement = placement::place_slice(&input).map_err(|e| match e {
            PlacementError::NoFeasiblePlacement(_) => RejectReason::NoFeasiblePlacement,
            PlacementError::Radio(RadioError::SlaUnsatisfiable { .. }) => RejectReason::SlaUnsatisfiable,
            PlacementError::Radio(RadioError::AdmissionOverflow { .. }) => RejectReason::AdmissionOverflow,
            PlacementError::Model(m) => RejectReason::Malformed(m.to_string()),
        })?;
        let mut shares: Vec<PrbShare> = self.policies.iter().map(|p| p.share()).collect();
        shares.push(PrbShare {
            floor: f64::from(placement.prb_floor),
            cap: radio::max_prbs(intent.tp_max_mbps, &self.cell),
        });
        radio::waterfill(&shares, f64::from(self.cell.prb_budget)).map_err(|_| RejectReason::AdmissionOverflow)?;
        Ok(placement)
    }

    fn apply_event(&mut self, event: SimEvent) -> Outcome {
        match event {
            SimEvent::SliceStart { intent } => self.start_slice(intent),
            SimEvent::SliceStop { slice } => self.stop_slice(slice),
            SimEvent::TrafficDemand { slice, mbps } => {
                if !mbps.is_finite() || mbps < 0.0 {
                    return self.reject(slice, None, RejectReason::Malformed("demand must be nonnegative".into()));
                }
                let Some(s) = self.slices.get_mut(&slice) else {
                    return self.reject(slice, None, RejectReason::UnknownSlice);
                };
                s.demand_mbps = mbps;
                self.control_due = true;
                self.log(LogEntry::TrafficDemand { slice, mbps });
                Outcome::Applied
            }
            SimEvent::AssuranceToggle { enabled } => {
                let effective = enabled && !self.options.disable_assurance;
                if effective && !self.assurance_enabled {
                    self.control_due = true;
                }
                if !effective {
                    self.assurance = AssuranceLoop::default();
                }
                self.assurance_enabled = effective;
                self.log(LogEntry::AssuranceToggled {
                    requested: enabled,
                    enabled: effective,
                });
                Outcome::Applied
            }
        }
    }

    fn start_slice(&mut self, intent: SliceIntent) -> Outcome {
        let id = intent.id();
        if self.slices.contains_key(&id) {
            return self.reject(id, Some(intent), RejectReason::DuplicateSnssai);
        }
        let placement = match self.admission_placement(&intent) {
            Ok(p) => p,
            Err(reason) => return self.reject(id, Some(intent), reason),
        };

        let state = SliceState::new(intent.clone())
            .commission(placement.clone())
            .expect("fresh slices start in preparation");
        self.log(LogEntry::SliceAdmitted {
            intent: intent.clone(),
            placement: placement.clone(),
        });
        let state = validate_transition(state, Lifecycle::Operation).expect("commissioning precedes operation");
        self.log(LogEntry::LifecycleChanged {
            slice: id,
            from: Lifecycle::Commissioning,
            to: Lifecycle::Operation,
        });
        self.slices.insert(
            id,
            ActiveSlice {
                state,
                demand_mbps: intent.tp_max_mbps,
                issued: placement.cpu_quota,
            },
        );
        self.sync_policies();
        self.control_due = true;
        Outcome::Admitted(placement)
    }

    fn stop_slice(&mut self, id: SliceId) -> Outcome {
        let Some(active) = self.slices.remove(&id) else {
            return self.reject(id, None, RejectReason::UnknownSlice);
        };
        let mut state = active.state;
        for to in [Lifecycle::Decommissioning, Lifecycle::Terminated] {
            let from = state.lifecycle;
            state = validate_transition(state, to).expect("operating slices wind down in order");
            self.log(LogEntry::LifecycleChanged { slice: id, from, to });
        }
        self.sync_policies();
        self.control_due = true;
        Outcome::Stopped(id)
    }

    fn sync_policies(&mut self) {
        let intents: Vec<SliceIntent> = self.slices.values().map(|s| s.state.intent.clone()).collect();
        for p in self.policies.sync(&intents, &self.cell) {
            self.log(LogEntry::A1Policy {
                slice: p.slice,
                floor: p.floor,
                cap: p.cap,
            });
        }
    }

    /// Advances one tick. Returns `None` once the horizon is reached.
    pub fn step(&mut self) -> Option<StepOutput> {
        if self.is_finished() {
            return None;
        }
        while self.pending.front().is_some_and(|e| e.t_ms <= self.now_ms) {
            let e = self.pending.pop_front().expect("front exists");
            self.apply_event(e.event);
        }

        let ids: Vec<SliceId> = self.slices.keys().copied().collect();
        let mpp = self.cell.mbps_per_prb();

        // Radio: floors from policy, caps trimmed to what the slice can use.
        let shares: Vec<PrbShare> = ids
            .iter()
            .map(|id| {
                let s = &self.slices[id];
                let p = self.policies.get(*id).expect("every active slice has a policy");
                let usable = s.demand_mbps.min(s.state.intent.tp_max_mbps) / mpp;
                PrbShare {
                    floor: f64::from(p.floor),
                    cap: p.cap.min(usable).max(f64::from(p.floor)),
                }
            })
            .collect();
        let alloc = radio::waterfill(&shares, f64::from(self.cell.prb_budget))
            .expect("admission keeps floors within the budget");

        let wanted: Vec<f64> = ids
            .iter()
            .zip(&alloc.granted)
            .map(|(id, g)| {
                let s = &self.slices[id];
                radio::prb_throughput(*g, &self.cell)
                    .min(s.demand_mbps)
                    .min(s.state.intent.tp_max_mbps)
            })
            .collect();

        // Compute quotas.
        let quotas: BTreeMap<SliceId, NfQuotas> = if self.assurance_enabled {
            self.control(&ids, &wanted);
            ids.iter().map(|id| (*id, self.slices[id].issued)).collect()
        } else {
            self.unmanaged_quotas(&ids, &wanted)
        };

        let frame = self.sample(&ids, &shares, &alloc.granted, &quotas);
        self.last_frame = Some(frame.clone());
        self.now_ms += self.tick_ms;
        Some(StepOutput {
            frame,
            records: std::mem::take(&mut self.staged),
        })
    }

    fn managed<'a>(&'a self, ids: &[SliceId], wanted: &[f64]) -> Vec<ManagedSlice<'a>> {
        ids.iter()
            .zip(wanted)
            .map(|(id, w)| {
                let s = &self.slices[id];
                ManagedSlice {
                    intent: &s.state.intent,
                    placement: s.placement(),
                    wanted_mbps: *w,
                }
            })
            .collect()
    }

    fn control(&mut self, ids: &[SliceId], wanted: &[f64]) {
        let period_over = self
            .last_control_ms
            .is_none_or(|t| self.now_ms >= t + self.control_period_ms);
        if !(self.control_due || period_over) {
            return;
        }
        let mut loop_state = std::mem::take(&mut self.assurance);
        let mut policies = std::mem::take(&mut self.policies);
        let out = {
            let managed = self.managed(ids, wanted);
            let input = TickInput {
                slices: &managed,
                topology: &self.topology,
                compute: &self.compute,
                cell: &self.cell,
                last_frame: self.last_frame.as_ref(),
            };
            loop_state.tick(&input, &mut policies)
        };
        self.assurance = loop_state;
        self.policies = policies;
        for p in out.policy_updates {
            self.log(LogEntry::A1Policy {
                slice: p.slice,
                floor: p.floor,
                cap: p.cap,
            });
        }
        for (id, q) in out.quota_updates {
            if let Some(s) = self.slices.get_mut(&id) {
                if s.issued != q {
                    s.issued = q;
                    self.log(LogEntry::O1Reconfig { slice: id, quotas: q });
                }
            }
        }
        self.last_control_ms = Some(self.now_ms);
        self.control_due = false;
    }

    /// No controller: NFs take what they need while the pool has room, and
    /// split it evenly once it does not.
    fn unmanaged_quotas(&self, ids: &[SliceId], wanted: &[f64]) -> BTreeMap<SliceId, NfQuotas> {
        let managed = self.managed(ids, wanted);
        let mut quotas: BTreeMap<SliceId, NfQuotas> = BTreeMap::new();
        for (pool, members) in assurance::pool_members(&managed) {
            let budget = self.topology.pool(&pool).map(|p| p.dataplane_budget_ms()).unwrap_or(0.0);
            let need = |m: &PoolSlice| {
                let d = self.compute.slice_cpu_demand(m.cap_mbps);
                NfQuotas {
                    cuup_ms: if m.has_cuup { d.cuup_ms } else { 0.0 },
                    upf_ms: if m.has_upf { d.upf_ms } else { 0.0 },
                }
            };
            let total: f64 = members.iter().map(|m| need(m).total()).sum();
            let pool_quotas: BTreeMap<SliceId, NfQuotas> = if total <= budget {
                members.iter().map(|m| (m.slice, need(m))).collect()
            } else {
                assurance::fair_share_baseline(&members, budget)
            };
            for (id, q) in pool_quotas {
                let e = quotas.entry(id).or_default();
                e.cuup_ms += q.cuup_ms;
                e.upf_ms += q.upf_ms;
            }
        }
        quotas
    }

    fn sample(
        &mut self,
        ids: &[SliceId],
        shares: &[PrbShare],
        granted: &[f64],
        quotas: &BTreeMap<SliceId, NfQuotas>,
    ) -> MetricsFrame {
        let dt_s = self.tick_ms as f64 / 1000.0;
        let dt_h = dt_s / 3600.0;
        let mut slices = Vec::with_capacity(ids.len());
        let mut tick_cost = 0.0;
        for (i, id) in ids.iter().enumerate() {
            let s = &self.slices[id];
            let p = s.placement();
            let q = quotas.get(id).copied().unwrap_or_default();
            let intent = &s.state.intent;
            let achieved = radio::prb_throughput(granted[i], &self.cell)
                .min(self.compute.cuup.throughput_for_cpu(q.cuup_ms))
                .min(self.compute.upf.throughput_for_cpu(q.upf_ms))
                .min(s.demand_mbps)
                .min(intent.tp_max_mbps);
            let used = self.compute.slice_cpu_demand(achieved);
            let sla = assurance::sla_for(intent, achieved, s.demand_mbps, p.predicted_rtt_ms);

            let cuup_pool = self.topology.pool(&p.pool_cuup).expect("placed on a known pool");
            let upf_pool = self.topology.pool(&p.pool_upf).expect("placed on a known pool");
            let nfs = [
                NfCharge {
                    pool: cuup_pool,
                    cpu_quota_ms: q.cuup_ms,
                    ram_gb: p.ram.cuup_gb,
                },
                NfCharge {
                    pool: upf_pool,
                    cpu_quota_ms: q.upf_ms,
                    ram_gb: p.ram.upf_gb,
                },
            ];
            tick_cost += accrue_cost(&nfs, upf_pool.bw_rate, achieved * dt_s / 8.0 / 1000.0, dt_h);

            slices.push(SliceMetrics {
                slice: *id,
                name: intent.label(),
                pool_cuup: p.pool_cuup.clone(),
                pool_upf: p.pool_upf.clone(),
                demand_mbps: s.demand_mbps,
                tp_max_mbps: intent.tp_max_mbps,
                floor_prbs: p.prb_floor,
                cap_prbs: shares[i].cap,
                granted_prbs: granted[i],
                achieved_mbps: achieved,
                rtt_ms: p.predicted_rtt_ms,
                cuup_quota_ms: q.cuup_ms,
                upf_quota_ms: q.upf_ms,
                cuup_cpu_ms: used.cuup_ms.min(q.cuup_ms),
                upf_cpu_ms: used.upf_ms.min(q.upf_ms),
                tp_violation_pct: sla.tp_violation_pct,
                delay_violated: sla.delay_violated,
            });
        }
        self.cumulative_cost += tick_cost;

        let pools = self
            .topology
            .pools()
            .iter()
            .map(|pool| {
                let (mut quota, mut used) = (0.0, 0.0);
                for m in &slices {
                    if m.pool_cuup == pool.id {
                        quota += m.cuup_quota_ms;
                        used += m.cuup_cpu_ms;
                    }
                    if m.pool_upf == pool.id {
                        quota += m.upf_quota_ms;
                        used += m.upf_cpu_ms;
                    }
                }
                let busy = pool.fixed_overhead_cpu_ms + pool.shared_nf_cpu_ms + used;
                PoolMetrics {
                    pool: pool.id.clone(),
                    dataplane_budget_ms: pool.dataplane_budget_ms(),
                    quota_ms: quota,
                    cpu_used_ms: used,
                    cpu_utilization: if pool.cpu_capacity_ms > 0.0 {
                        (busy / pool.cpu_capacity_ms).clamp(0.0, 1.0)
                    } else {
                        0.0
                    },
                }
            })
            .collect();

        let frame = MetricsFrame {
            seq: self.next_frame,
            t_ms: self.now_ms,
            assurance_enabled: self.assurance_enabled,
            slices,
            pools,
            cumulative_cost: self.cumulative_cost,
        };
        self.next_frame += 1;
        frame
    }
}
