//! Radio slicing: throughput SLAs become guaranteed PRB floors, and the
//! cell's PRB budget is shared by max-min water-filling above those floors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CellConfig;

/// Slack for float noise when turning Mbps into PRB counts.
const PRB_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadioError {
    #[error("throughput floor {tp_min_mbps} Mbps exceeds the cell maximum {cell_max_mbps} Mbps")]
    SlaUnsatisfiable { tp_min_mbps: f64, cell_max_mbps: f64 },

    #[error("guaranteed PRBs {floors} exceed the budget {budget}")]
    AdmissionOverflow { floors: f64, budget: f64 },
}

/// Guaranteed PRBs for a throughput floor, rounded up to the grant quantum.
pub fn min_prbs(tp_min_mbps: f64, cell: &CellConfig) -> Result<u32, RadioError> {
    if tp_min_mbps > cell.cell_max_mbps {
        return Err(RadioError::SlaUnsatisfiable {
            tp_min_mbps,
            cell_max_mbps: cell.cell_max_mbps,
        });
    }
    let raw = (tp_min_mbps.max(0.0) / cell.mbps_per_prb() - PRB_EPS).ceil().max(0.0) as u32;
    let q = cell.prb_quantum.max(1);
    Ok(raw.div_ceil(q) * q)
}

/// Largest PRB grant worth giving a slice that never needs more than
/// `tp_max_mbps`. Not quantized.
pub fn max_prbs(tp_max_mbps: f64, cell: &CellConfig) -> f64 {
    (tp_max_mbps.max(0.0) / cell.mbps_per_prb() - PRB_EPS).ceil().max(0.0)
}

pub fn prb_throughput(granted: f64, cell: &CellConfig) -> f64 {
    granted.max(0.0) * cell.mbps_per_prb()
}

/// Floor and cap of one slice's PRB share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrbShare {
    pub floor: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrbAllocation {
    pub shares: Vec<PrbShare>,
    pub granted: Vec<f64>,
}

impl PrbAllocation {
    pub fn total(&self) -> f64 {
        self.granted.iter().sum()
    }
}

/// Max-min fair split of `budget` PRBs above each slice's floor.
///
/// Every slice starts at its floor; the lowest grants are then raised
/// together until the budget runs out or every slice sits at its cap.
/// A cap below its floor is treated as equal to the floor.
pub fn waterfill(shares: &[PrbShare], budget: f64) -> Result<PrbAllocation, RadioError> {
    let shares: Vec<PrbShare> = shares
        .iter()
        .map(|s| PrbShare {
            floor: s.floor,
            cap: s.cap.max(s.floor),
        })
        .collect();
    let floors: f64 = shares.iter().map(|s| s.floor).sum();
    if floors > budget + PRB_EPS {
        return Err(RadioError::AdmissionOverflow { floors, budget });
    }
    let caps: f64 = shares.iter().map(|s| s.cap).sum();
    if caps <= budget {
        return Ok(PrbAllocation {
            granted: shares.iter().map(|s| s.cap).collect(),
            shares,
        });
    }

    // sum_i clamp(level, floor_i, cap_i) is piecewise-linear and nondecreasing
    // in the level, with kinks at every floor and cap. Walk the kinks in order
    // and solve exactly inside the segment that crosses the budget.
    let mut kinks: Vec<f64> = shares.iter().flat_map(|s| [s.floor, s.cap]).collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();
    let filled = |level: f64| -> f64 { shares.iter().map(|s| level.clamp(s.floor, s.cap)).sum() };

    let mut level = kinks[0];
    let mut prev_level = kinks[0];
    let mut prev_fill = filled(prev_level);
    for &k in &kinks[1..] {
        let f = filled(k);
        if f >= budget {
            // Slope on (prev_level, k) = slices whose [floor, cap) covers it.
            let active = shares.iter().filter(|s| s.floor <= prev_level && s.cap > prev_level).count();
            level = if active == 0 {
                k
            } else {
                prev_level + (budget - prev_fill) / active as f64
            };
            break;
        }
        prev_level = k;
        prev_fill = f;
        level = k;
    }

    let mut granted: Vec<f64> = shares.iter().map(|s| level.clamp(s.floor, s.cap)).collect();
    // Push the rounding residue onto an unsaturated slice so the grants sum
    // to the budget.
    let residue = budget - granted.iter().sum::<f64>();
    if residue != 0.0 {
        if let Some(i) = (0..granted.len()).find(|&i| {
            let g = granted[i] + residue;
            g >= shares[i].floor && g <= shares[i].cap && granted[i] > shares[i].floor
        }) {
            granted[i] += residue;
        }
    }
    Ok(PrbAllocation { shares, granted })
}
