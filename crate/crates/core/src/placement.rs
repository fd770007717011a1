//! Placement of a slice's CU-UP and UPF onto data-center pools.
//!
//! A pair of pools is feasible when the round trip through it fits the
//! intent's delay ceiling and both pools can still hold the slice's
//! guaranteed CPU and RAM. Among feasible pairs the cheapest daily rental
//! wins; ties go to co-located pairs, then to the lexicographically smaller
//! `(cuup, upf)` ids.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compute::{accrue_cost, ComputeModel, NfCharge, NfQuotas, NfRam, DAY_HOURS};
use crate::error::ModelError;
use crate::model::{CellConfig, PoolId, SliceId, SliceIntent, Topology};
use crate::radio::{self, RadioError};

/// Capacity slack for float noise in feasibility checks.
const CAPACITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub slice: SliceId,
    pub pool_cuup: PoolId,
    pub pool_upf: PoolId,
    pub cpu_quota: NfQuotas,
    pub ram: NfRam,
    pub prb_floor: u32,
    pub predicted_rtt_ms: f64,
    /// Rental cost over one day at the guaranteed rate.
    pub daily_cost: f64,
}

impl Placement {
    pub fn is_colocated(&self) -> bool {
        self.pool_cuup == self.pool_upf
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("no pool pair satisfies the delay and capacity constraints of slice {0}")]
    NoFeasiblePlacement(SliceId),

    #[error(transparent)]
    Radio(#[from] RadioError),

    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Round-trip time of a UE's packets through the DU, the CU-UP and the UPF.
pub fn rtt(pool_cuup: &PoolId, pool_upf: &PoolId, topology: &Topology) -> Result<f64, ModelError> {
    let one_way = topology.radio_delay_ms
        + topology.link_delay(topology.du_pool(), pool_cuup)?
        + topology.link_delay(pool_cuup, pool_upf)?
        + topology.core_delay_ms;
    Ok(2.0 * one_way)
}

/// CPU and RAM each pool can still promise to new guaranteed load.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Residual {
    pub cpu_ms: BTreeMap<PoolId, f64>,
    pub ram_gb: BTreeMap<PoolId, f64>,
}

impl Residual {
    /// Full admission capacity of every pool.
    pub fn of(topology: &Topology) -> Self {
        let mut r = Residual::default();
        for p in topology.pools() {
            r.cpu_ms.insert(p.id.clone(), p.admission_cpu_ms());
            r.ram_gb.insert(p.id.clone(), p.admission_ram_gb());
        }
        r
    }

    /// Residual after subtracting the reservations of `placements`.
    pub fn after<'a>(topology: &Topology, placements: impl IntoIterator<Item = &'a Placement>) -> Self {
        let mut r = Self::of(topology);
        for p in placements {
            r.reserve(p);
        }
        r
    }

    pub fn reserve(&mut self, p: &Placement) {
        self.adjust(p, -1.0);
    }

    pub fn release(&mut self, p: &Placement) {
        self.adjust(p, 1.0);
    }

    fn adjust(&mut self, p: &Placement, sign: f64) {
        for (pool, cpu, ram) in [
            (&p.pool_cuup, p.cpu_quota.cuup_ms, p.ram.cuup_gb),
            (&p.pool_upf, p.cpu_quota.upf_ms, p.ram.upf_gb),
        ] {
            *self.cpu_ms.entry(pool.clone()).or_default() += sign * cpu;
            *self.ram_gb.entry(pool.clone()).or_default() += sign * ram;
        }
    }

    fn cpu(&self, pool: &PoolId) -> f64 {
        self.cpu_ms.get(pool).copied().unwrap_or(0.0)
    }

    fn ram(&self, pool: &PoolId) -> f64 {
        self.ram_gb.get(pool).copied().unwrap_or(0.0)
    }
}

/// Everything a placement decision looks at.
#[derive(Debug, Clone, Copy)]
pub struct PlacementInput<'a> {
    pub intent: &'a SliceIntent,
    pub topology: &'a Topology,
    pub compute: &'a ComputeModel,
    pub cell: &'a CellConfig,
    pub residual: &'a Residual,
}

fn capacity_fits(input: &PlacementInput<'_>, cuup: &PoolId, upf: &PoolId, demand: &NfQuotas) -> bool {
    let ram = &input.compute.ram;
    let r = input.residual;
    if cuup == upf {
        demand.total() <= r.cpu(cuup) + CAPACITY_EPS && ram.cuup_gb + ram.upf_gb <= r.ram(cuup) + CAPACITY_EPS
    } else {
        demand.cuup_ms <= r.cpu(cuup) + CAPACITY_EPS
            && demand.upf_ms <= r.cpu(upf) + CAPACITY_EPS
            && ram.cuup_gb <= r.ram(cuup) + CAPACITY_EPS
            && ram.upf_gb <= r.ram(upf) + CAPACITY_EPS
    }
}

/// All `(cuup, upf)` pool pairs that meet the delay ceiling and fit the
/// residual capacity, in pool-declaration order.
pub fn feasible_placements(input: &PlacementInput<'_>) -> Result<Vec<(PoolId, PoolId)>, ModelError> {
    let demand = input.compute.slice_cpu_demand(input.intent.tp_min_mbps);
    let pools = input.topology.pools();
    let mut out = Vec::new();
    for a in pools {
        for b in pools {
            let rtt = rtt(&a.id, &b.id, input.topology)?;
            if rtt <= input.intent.delay_max_ms && capacity_fits(input, &a.id, &b.id, &demand) {
                out.push((a.id.clone(), b.id.clone()));
            }
        }
    }
    Ok(out)
}

/// Daily rental of a slice at its guaranteed rate on the given pools.
/// Traffic is billed at the UPF's pool, where it leaves for the data network.
pub fn daily_cost(
    intent: &SliceIntent,
    compute: &ComputeModel,
    topology: &Topology,
    pool_cuup: &PoolId,
    pool_upf: &PoolId,
) -> Result<f64, ModelError> {
    let demand = compute.slice_cpu_demand(intent.tp_min_mbps);
    let a = topology.pool(pool_cuup)?;
    let b = topology.pool(pool_upf)?;
    let nfs = [
        NfCharge {
            pool: a,
            cpu_quota_ms: demand.cuup_ms,
            ram_gb: compute.ram.cuup_gb,
        },
        NfCharge {
            pool: b,
            cpu_quota_ms: demand.upf_ms,
            ram_gb: compute.ram.upf_gb,
        },
    ];
    let gb = intent.tp_min_mbps * DAY_HOURS * 3600.0 / 8.0 / 1000.0;
    Ok(accrue_cost(&nfs, b.bw_rate, gb, DAY_HOURS))
}

/// Total order used to pick among equally cheap pairs.
fn tie_break(a: &(f64, &PoolId, &PoolId), b: &(f64, &PoolId, &PoolId)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| (a.1 != a.2).cmp(&(b.1 != b.2)))
        .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
}

fn build(input: &PlacementInput<'_>, cuup: &PoolId, upf: &PoolId, cost: f64) -> Result<Placement, PlacementError> {
    let intent = input.intent;
    Ok(Placement {
        slice: intent.id(),
        pool_cuup: cuup.clone(),
        pool_upf: upf.clone(),
        cpu_quota: input.compute.slice_cpu_demand(intent.tp_min_mbps),
        ram: input.compute.ram,
        prb_floor: radio::min_prbs(intent.tp_min_mbps, input.cell)?,
        predicted_rtt_ms: rtt(cuup, upf, input.topology)?,
        daily_cost: cost,
    })
}

/// Cheapest feasible placement for the intent.
///
/// CU-UP pools are screened by the part of the round trip that does not
/// depend on the UPF, so pairs behind an already-too-slow fronthaul are never
/// priced.
pub fn place_slice(input: &PlacementInput<'_>) -> Result<Placement, PlacementError> {
    let intent = input.intent;
    // The floor check comes first: an unsatisfiable SLA is not a placement problem.
    radio::min_prbs(intent.tp_min_mbps, input.cell)?;
    let topo = input.topology;
    let demand = input.compute.slice_cpu_demand(intent.tp_min_mbps);

    let mut best: Option<(f64, &PoolId, &PoolId)> = None;
    for a in topo.pools() {
        let front = 2.0 * (topo.radio_delay_ms + topo.link_delay(topo.du_pool(), &a.id)? + topo.core_delay_ms);
        if front > intent.delay_max_ms + 1e-9 {
            continue;
        }
        for b in topo.pools() {
            if rtt(&a.id, &b.id, topo)? > intent.delay_max_ms {
                continue;
            }
            if !capacity_fits(input, &a.id, &b.id, &demand) {
                continue;
            }
            let cand = (daily_cost(intent, input.compute, topo, &a.id, &b.id)?, &a.id, &b.id);
            if best.as_ref().is_none_or(|cur| tie_break(&cand, cur) == Ordering::Less) {
                best = Some(cand);
            }
        }
    }
    let (cost, a, b) = best.ok_or(PlacementError::NoFeasiblePlacement(intent.id()))?;
    build(input, a, b, cost)
}

/// Exhaustive reference for [`place_slice`]: price every feasible pair and
/// sort.
pub fn brute_force_place(input: &PlacementInput<'_>) -> Result<Placement, PlacementError> {
    radio::min_prbs(input.intent.tp_min_mbps, input.cell)?;
    let pairs = feasible_placements(input)?;
    let mut priced = Vec::with_capacity(pairs.len());
    for (a, b) in &pairs {
        priced.push((daily_cost(input.intent, input.compute, input.topology, a, b)?, a, b));
    }
    priced.sort_by(tie_break);
    let (cost, a, b) = priced
        .first()
        .copied()
        .ok_or(PlacementError::NoFeasiblePlacement(input.intent.id()))?;
    build(input, a, b, cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::bundled;

    fn intent(sd: u32, delay_max: f64, tp_min: f64) -> SliceIntent {
        SliceIntent {
            name: None,
            sst: 1,
            sd,
            delay_min_ms: 0.0,
            delay_max_ms: delay_max,
            tp_min_mbps: tp_min,
            tp_max_mbps: 250.0,
            priority: 1,
        }
    }

    fn pid(s: &str) -> PoolId {
        PoolId::new(s)
    }

    #[test]
    fn rtt_by_tier() {
        let sc = bundled::exp1();
        let t = &sc.topology;
        assert_eq!(rtt(&pid("edge"), &pid("edge"), t).unwrap(), 20.0);
        assert_eq!(rtt(&pid("regional"), &pid("regional"), t).unwrap(), 60.0);
        assert_eq!(rtt(&pid("central"), &pid("central"), t).unwrap(), 80.0);
        assert!(rtt(&pid("nowhere"), &pid("edge"), t).is_err());
    }

    #[test]
    fn s2_excludes_central() {
        let sc = bundled::exp1();
        let residual = Residual::of(&sc.topology);
        let i = intent(2, 70.0, 70.0);
        let input = PlacementInput {
            intent: &i,
            topology: &sc.topology,
            compute: &sc.compute,
            cell: &sc.cell,
            residual: &residual,
        };
        let pairs = feasible_placements(&input).unwrap();
        assert!(!pairs.is_empty());
        assert!(pairs.iter().all(|(a, b)| a.as_str() != "central" && b.as_str() != "central"));
        assert_eq!(place_slice(&input).unwrap().pool_cuup, pid("regional"));
    }

    #[test]
    fn zero_delay_ceiling_is_empty() {
        let sc = bundled::exp1();
        let residual = Residual::of(&sc.topology);
        let i = intent(2, 0.0, 10.0);
        let input = PlacementInput {
            intent: &i,
            topology: &sc.topology,
            compute: &sc.compute,
            cell: &sc.cell,
            residual: &residual,
        };
        assert!(feasible_placements(&input).unwrap().is_empty());
        assert_eq!(
            place_slice(&input).unwrap_err(),
            PlacementError::NoFeasiblePlacement(i.id())
        );
    }

    #[test]
    fn unlimited_delay_gives_all_nine_pairs_and_central_wins() {
        let sc = bundled::exp1();
        let residual = Residual::of(&sc.topology);
        let i = intent(9, 1e9, 10.0);
        let input = PlacementInput {
            intent: &i,
            topology: &sc.topology,
            compute: &sc.compute,
            cell: &sc.cell,
            residual: &residual,
        };
        assert_eq!(feasible_placements(&input).unwrap().len(), 9);
        let p = place_slice(&input).unwrap();
        assert_eq!((p.pool_cuup.as_str(), p.pool_upf.as_str()), ("central", "central"));
    }

    #[test]
    fn edge_exhaustion_rejects_s3() {
        let sc = bundled::exp1();
        let mut residual = Residual::of(&sc.topology);
        residual.cpu_ms.insert(pid("edge"), 10.0);
        let i = intent(3, 50.0, 30.0);
        let input = PlacementInput {
            intent: &i,
            topology: &sc.topology,
            compute: &sc.compute,
            cell: &sc.cell,
            residual: &residual,
        };
        assert!(matches!(
            place_slice(&input),
            Err(PlacementError::NoFeasiblePlacement(_))
        ));
        assert!(matches!(
            brute_force_place(&input),
            Err(PlacementError::NoFeasiblePlacement(_))
        ));
    }

    #[test]
    fn unsatisfiable_throughput() {
        let sc = bundled::exp1();
        let residual = Residual::of(&sc.topology);
        let i = intent(3, 50.0, 300.0);
        let mut i = i;
        i.tp_max_mbps = 300.0;
        let input = PlacementInput {
            intent: &i,
            topology: &sc.topology,
            compute: &sc.compute,
            cell: &sc.cell,
            residual: &residual,
        };
        assert!(matches!(
            place_slice(&input),
            Err(PlacementError::Radio(RadioError::SlaUnsatisfiable { .. }))
        ));
    }

    #[test]
    fn reserve_and_release_are_inverse() {
        let sc = bundled::exp1();
        let base = Residual::of(&sc.topology);
        let i = intent(3, 50.0, 30.0);
        let input = PlacementInput {
            intent: &i,
            topology: &sc.topology,
            compute: &sc.compute,
            cell: &sc.cell,
            residual: &base,
        };
        let p = place_slice(&input).unwrap();
        let mut r = base.clone();
        r.reserve(&p);
        assert!(r.cpu_ms[&pid("edge")] < base.cpu_ms[&pid("edge")]);
        r.release(&p);
        for (k, v) in &base.cpu_ms {
            assert!((r.cpu_ms[k] - v).abs() < 1e-12);
        }
    }
}
