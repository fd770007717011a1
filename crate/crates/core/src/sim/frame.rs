use serde::{Deserialize, Serialize};

use crate::model::{CellConfig, PoolId, SliceId, Topology};
use crate::compute::ComputeModel;

/// One slice's row in a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub slice: SliceId,
    pub name: String,
    pub pool_cuup: PoolId,
    pub pool_upf: PoolId,
    pub demand_mbps: f64,
    pub tp_max_mbps: f64,
    pub floor_prbs: u32,
    pub cap_prbs: f64,
    pub granted_prbs: f64,
    pub achieved_mbps: f64,
    pub rtt_ms: f64,
    pub cuup_quota_ms: f64,
    pub upf_quota_ms: f64,
    pub cuup_cpu_ms: f64,
    pub upf_cpu_ms: f64,
    pub tp_violation_pct: f64,
    pub delay_violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolMetrics {
    pub pool: PoolId,
    pub dataplane_budget_ms: f64,
    pub quota_ms: f64,
    pub cpu_used_ms: f64,
    /// Baseline, shared NFs and slice NFs over capacity.
    pub cpu_utilization: f64,
}

/// State of the network sampled at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    /// Frame index within the run, from 0.
    pub seq: u64,
    pub t_ms: u64,
    pub assurance_enabled: bool,
    pub slices: Vec<SliceMetrics>,
    pub pools: Vec<PoolMetrics>,
    pub cumulative_cost: f64,
}

impl MetricsFrame {
    pub fn slice(&self, id: SliceId) -> Option<&SliceMetrics> {
        self.slices.iter().find(|s| s.slice == id)
    }

    pub fn pool(&self, id: &PoolId) -> Option<&PoolMetrics> {
        self.pools.iter().find(|p| &p.pool == id)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Re-derives every model relation a frame must satisfy, straight from the
/// curves and the cell, and reports the first one that fails.
pub fn validate_frame(
    frame: &MetricsFrame,
    topology: &Topology,
    cell: &CellConfig,
    compute: &ComputeModel,
) -> Result<(), String> {
    let t = frame.t_ms;
    let mut granted_sum = 0.0;
    for s in &frame.slices {
        let radio = s.granted_prbs * cell.cell_max_mbps / f64::from(cell.prb_budget);
        let expected = radio
            .min(compute.cuup.throughput_for_cpu(s.cuup_quota_ms))
            .min(compute.upf.throughput_for_cpu(s.upf_quota_ms))
            .min(s.demand_mbps)
            .min(s.tp_max_mbps);
        if !close(expected, s.achieved_mbps) {
            return Err(format!(
                "t={t}: slice {} achieved {} but the bounds give {expected}",
                s.slice, s.achieved_mbps
            ));
        }
        if f64::from(s.floor_prbs) > s.granted_prbs + 1e-9 || s.granted_prbs > s.cap_prbs.max(f64::from(s.floor_prbs)) + 1e-9 {
            return Err(format!("t={t}: slice {} grant {} outside [floor, cap]", s.slice, s.granted_prbs));
        }
        if s.cuup_cpu_ms > s.cuup_quota_ms + 1e-9 || s.upf_cpu_ms > s.upf_quota_ms + 1e-9 {
            return Err(format!("t={t}: slice {} uses more CPU than its quota", s.slice));
        }
        if !(0.0..=100.0).contains(&s.tp_violation_pct) {
            return Err(format!("t={t}: slice {} violation out of range", s.slice));
        }
        granted_sum += s.granted_prbs;
    }
    if granted_sum > f64::from(cell.prb_budget) + 1e-9 {
        return Err(format!("t={t}: {granted_sum} PRBs granted over a budget of {}", cell.prb_budget));
    }
    for pool in topology.pools() {
        let quota: f64 = frame
            .slices
            .iter()
            .map(|s| {
                let mut q = 0.0;
                if s.pool_cuup == pool.id {
                    q += s.cuup_quota_ms;
                }
                if s.pool_upf == pool.id {
                    q += s.upf_quota_ms;
                }
                q
            })
            .sum();
        if quota > pool.dataplane_budget_ms() + 1e-9 {
            return Err(format!(
                "t={t}: pool {} quotas {quota} exceed its data-plane budget {}",
                pool.id,
                pool.dataplane_budget_ms()
            ));
        }
        if let Some(m) = frame.pool(&pool.id) {
            if !(0.0..=1.0 + 1e-12).contains(&m.cpu_utilization) {
                return Err(format!("t={t}: pool {} utilization {}", pool.id, m.cpu_utilization));
            }
        }
    }
    Ok(())
}
