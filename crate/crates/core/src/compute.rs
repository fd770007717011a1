//! CPU quota <-> throughput curves for the data-plane NFs, and the
//! pay-as-you-go rental cost.
//!
//! Curves are piecewise-linear through the measured profile points and
//! extend past the last point with the last segment's slope.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{DcPool, NfProfile, NfType};

/// Hours in the placement cost horizon.
pub const DAY_HOURS: f64 = 24.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpuThroughputCurve {
    pub nf_type: NfType,
    /// `(cpu_ms, mbps)` pairs, nondecreasing in both coordinates.
    breakpoints: Vec<(f64, f64)>,
    /// Mbps per CPU-ms past the last breakpoint.
    tail_slope: f64,
}

impl CpuThroughputCurve {
    pub fn from_profile(profile: &NfProfile) -> Result<Self, ModelError> {
        profile.validate()?;
        if profile.points.is_empty() {
            return Err(ModelError::invariant("CpuThroughputCurve", "profile has no points"));
        }
        let mut breakpoints: Vec<(f64, f64)> = profile
            .points
            .iter()
            .map(|p| (p.cpu_ms, p.throughput_mbps))
            .collect();
        if breakpoints[0].0 > 0.0 {
            breakpoints.insert(0, (0.0, 0.0));
        }
        let tail_slope = match breakpoints.as_slice() {
            [.., (c0, t0), (c1, t1)] if c1 > c0 => (t1 - t0) / (c1 - c0),
            // A vertical last segment gives no usable slope; stay flat.
            _ => 0.0,
        };
        Ok(CpuThroughputCurve {
            nf_type: profile.nf_type,
            breakpoints,
            tail_slope,
        })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    /// Achievable throughput with `quota_ms` of CPU per second.
    pub fn throughput_for_cpu(&self, quota_ms: f64) -> f64 {
        let q = quota_ms.max(0.0);
        let bp = &self.breakpoints;
        let (last_c, last_t) = bp[bp.len() - 1];
        if q >= last_c {
            return last_t + self.tail_slope * (q - last_c);
        }
        if q < bp[0].0 {
            return 0.0;
        }
        // First breakpoint strictly right of q; the segment to its left holds q.
        let hi = bp.partition_point(|&(c, _)| c <= q);
        let (c0, t0) = bp[hi - 1];
        let (c1, t1) = bp[hi];
        t0 + (t1 - t0) * (q - c0) / (c1 - c0)
    }

    /// Smallest quota that reaches `mbps`. Returns infinity if the curve
    /// flattens out below the target.
    pub fn cpu_for_throughput(&self, mbps: f64) -> f64 {
        let t = mbps.max(0.0);
        let bp = &self.breakpoints;
        if t <= bp[0].1 {
            return bp[0].0;
        }
        let (last_c, last_t) = bp[bp.len() - 1];
        if t > last_t {
            if self.tail_slope <= 0.0 {
                return f64::INFINITY;
            }
            return last_c + (t - last_t) / self.tail_slope;
        }
        // First breakpoint whose throughput reaches t.
        let hi = bp.partition_point(|&(_, tp)| tp < t);
        let (c0, t0) = bp[hi - 1];
        let (c1, t1) = bp[hi];
        c0 + (c1 - c0) * (t - t0) / (t1 - t0)
    }
}

/// CPU quotas for the two per-slice data-plane NFs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NfQuotas {
    pub cuup_ms: f64,
    pub upf_ms: f64,
}

impl NfQuotas {
    pub fn total(&self) -> f64 {
        self.cuup_ms + self.upf_ms
    }
}

/// RAM reservations for the two per-slice data-plane NFs, in GB.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NfRam {
    pub cuup_gb: f64,
    pub upf_gb: f64,
}

/// Curves and RAM demand for the per-slice data plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeModel {
    pub cuup: CpuThroughputCurve,
    pub upf: CpuThroughputCurve,
    pub ram: NfRam,
}

impl ComputeModel {
    pub fn from_profiles(profiles: &[NfProfile]) -> Result<Self, ModelError> {
        let find = |ty: NfType| {
            profiles
                .iter()
                .find(|p| p.nf_type == ty)
                .ok_or_else(|| ModelError::invariant("NfProfile", format!("missing {ty} profile")))
        };
        let cuup = find(NfType::CuUp)?;
        let upf = find(NfType::Upf)?;
        Ok(ComputeModel {
            cuup: CpuThroughputCurve::from_profile(cuup)?,
            upf: CpuThroughputCurve::from_profile(upf)?,
            ram: NfRam {
                cuup_gb: cuup.ram_demand_gb(),
                upf_gb: upf.ram_demand_gb(),
            },
        })
    }

    pub fn curve(&self, nf: NfType) -> Option<&CpuThroughputCurve> {
        match nf {
            NfType::CuUp => Some(&self.cuup),
            NfType::Upf => Some(&self.upf),
            _ => None,
        }
    }

    /// Quotas that let a slice carry `tp_mbps` through both NFs.
    pub fn slice_cpu_demand(&self, tp_mbps: f64) -> NfQuotas {
        NfQuotas {
            cuup_ms: self.cuup.cpu_for_throughput(tp_mbps),
            upf_ms: self.upf.cpu_for_throughput(tp_mbps),
        }
    }

    /// Throughput the slower of the two NFs can carry under `quotas`.
    pub fn slice_throughput(&self, quotas: &NfQuotas) -> f64 {
        self.cuup
            .throughput_for_cpu(quotas.cuup_ms)
            .min(self.upf.throughput_for_cpu(quotas.upf_ms))
    }
}

/// One NF's reservation at a pool, for cost purposes.
#[derive(Debug, Clone, Copy)]
pub struct NfCharge<'a> {
    pub pool: &'a DcPool,
    pub cpu_quota_ms: f64,
    pub ram_gb: f64,
}

/// Gigabytes moved by a rate timeline sampled every `dt_s` seconds.
pub fn traffic_gb(achieved_mbps: &[f64], dt_s: f64) -> f64 {
    achieved_mbps.iter().sum::<f64>() * dt_s / 8.0 / 1000.0
}

/// Pay-as-you-go cost of holding `nfs` for `duration_h` hours while moving
/// `transferred_gb` through a pool charging `bw_rate` per GB.
///
/// `cost = sum_nf (quota/100 * cpu_rate + ram * ram_rate) * duration_h + bw_rate * GB`
pub fn accrue_cost(nfs: &[NfCharge<'_>], bw_rate: f64, transferred_gb: f64, duration_h: f64) -> f64 {
    let hourly: f64 = nfs
        .iter()
        .map(|nf| nf.cpu_quota_ms / 100.0 * nf.pool.cpu_rate + nf.ram_gb * nf.pool.ram_rate)
        .sum();
    hourly * duration_h + bw_rate * transferred_gb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PoolId, ProfilePoint, Tier};

    fn profile(nf: NfType, pts: &[(f64, f64, f64)]) -> NfProfile {
        NfProfile {
            nf_type: nf,
            points: pts
                .iter()
                .map(|&(t, c, r)| ProfilePoint {
                    throughput_mbps: t,
                    cpu_ms: c,
                    ram_mb: r,
                })
                .collect(),
            shared: false,
        }
    }

    fn model() -> ComputeModel {
        ComputeModel::from_profiles(&[
            profile(NfType::CuUp, &[(0.0, 0.0, 2.8), (20.0, 21.0, 3.8), (250.0, 244.0, 3.8)]),
            profile(NfType::Upf, &[(0.0, 0.0, 4.7), (20.0, 27.0, 4.8), (250.0, 307.0, 4.8)]),
        ])
        .unwrap()
    }

    #[test]
    fn table_points_and_zero() {
        let m = model();
        assert_eq!(m.cuup.throughput_for_cpu(244.0), 250.0);
        assert_eq!(m.cuup.throughput_for_cpu(0.0), 0.0);
        assert_eq!(m.upf.cpu_for_throughput(250.0), 307.0);
        assert_eq!(m.cuup.cpu_for_throughput(20.0), 21.0);
    }

    #[test]
    fn upf_interpolation_between_measurements() {
        // Hand interpolation between (27 ms, 20 Mbps) and (307 ms, 250 Mbps).
        let expected = 20.0 + (230.0 / 280.0) * (167.0 - 27.0);
        assert!((model().upf.throughput_for_cpu(167.0) - expected).abs() < 1e-12);
        assert!((expected - 135.0).abs() < 1e-9);
    }

    #[test]
    fn extrapolates_with_last_slope() {
        let m = model();
        let slope = 230.0 / 223.0;
        assert!((m.cuup.throughput_for_cpu(300.0) - (250.0 + slope * 56.0)).abs() < 1e-9);
        assert!((m.cuup.cpu_for_throughput(300.0) - (244.0 + 50.0 / slope)).abs() < 1e-9);
    }

    #[test]
    fn demand_at_zero_and_full_load() {
        let m = model();
        assert_eq!(m.slice_cpu_demand(250.0), NfQuotas { cuup_ms: 244.0, upf_ms: 307.0 });
        assert_eq!(m.slice_cpu_demand(0.0), NfQuotas::default());
    }

    #[test]
    fn inverse_holds_at_breakpoints() {
        let m = model();
        for c in [&m.cuup, &m.upf] {
            for &(q, _) in c.breakpoints() {
                assert_eq!(c.cpu_for_throughput(c.throughput_for_cpu(q)), q);
            }
        }
    }

    #[test]
    fn profile_without_origin_is_anchored() {
        let c = CpuThroughputCurve::from_profile(&profile(
            NfType::Upf,
            &[(10.0, 20.0, 1.0), (20.0, 40.0, 1.0)],
        ))
        .unwrap();
        assert_eq!(c.breakpoints()[0], (0.0, 0.0));
        assert_eq!(c.throughput_for_cpu(10.0), 5.0);
    }

    #[test]
    fn flat_tail_has_no_inverse_above_it() {
        // Vertical final segment: same CPU, more throughput.
        let c = CpuThroughputCurve::from_profile(&profile(
            NfType::Upf,
            &[(0.0, 0.0, 1.0), (10.0, 10.0, 1.0), (20.0, 10.0, 1.0)],
        ))
        .unwrap();
        assert_eq!(c.tail_slope(), 0.0);
        assert_eq!(c.throughput_for_cpu(10.0), 20.0);
        assert_eq!(c.throughput_for_cpu(50.0), 20.0);
        assert_eq!(c.cpu_for_throughput(15.0), 10.0);
        assert!(c.cpu_for_throughput(21.0).is_infinite());
    }

    #[test]
    fn missing_profile_is_an_error() {
        let err = ComputeModel::from_profiles(&[profile(
            NfType::CuUp,
            &[(0.0, 0.0, 2.8), (20.0, 21.0, 3.8)],
        )])
        .unwrap_err();
        assert!(err.to_string().contains("UPF"));
    }

    fn central() -> DcPool {
        DcPool {
            id: PoolId::new("central"),
            tier: Tier::Central,
            cpu_capacity_ms: 10000.0,
            ram_capacity_gb: 100.0,
            cpu_rate: 0.001,
            ram_rate: 0.002,
            bw_rate: 0.1,
            fixed_overhead_cpu_ms: 150.0,
            fixed_overhead_ram_gb: 0.0,
            shared_nf_cpu_ms: 0.0,
            cpu_overcommit: 1.0,
            hosts_du: false,
        }
    }

    #[test]
    fn daily_cost_of_a_full_cuup_at_central() {
        let pool = central();
        let nf = NfCharge {
            pool: &pool,
            cpu_quota_ms: 244.0,
            ram_gb: 0.0038,
        };
        let cost = accrue_cost(&[nf], pool.bw_rate, 0.0, 24.0);
        assert!((cost - 24.0 * (2.44 * 0.001 + 0.0038 * 0.002)).abs() < 1e-12);
        assert!((cost - 0.0587424).abs() < 1e-12);
    }

    #[test]
    fn zero_load_costs_nothing() {
        let pool = central();
        let nf = NfCharge {
            pool: &pool,
            cpu_quota_ms: 0.0,
            ram_gb: 0.0,
        };
        assert_eq!(accrue_cost(&[nf], 0.1, 0.0, 5.0), 0.0);
    }

    #[test]
    fn traffic_integration() {
        // 80 Mbps for 100 s is 8000 Mb = 1 GB.
        assert!((traffic_gb(&[80.0; 100], 1.0) - 1.0).abs() < 1e-12);
        assert_eq!(traffic_gb(&[], 1.0), 0.0);
    }
}
