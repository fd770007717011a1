//! Domain types shared by every other module: slice intents, data-center
//! pools, the inter-pool topology, the radio cell and the measured NF
//! resource profiles.
//!
//! All values are plain data. Constructors and `validate` methods enforce
//! the invariants; nothing here mutates in place.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;
use crate::placement::Placement;

/// Identity of a slice: the S-NSSAI `(sst, sd)` pair.
///
/// Rendered as `"<sst>-<sd>"` wherever a string key is needed (JSON maps,
/// URLs, CSV columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SliceId {
    pub sst: u8,
    pub sd: u32,
}

impl SliceId {
    pub fn new(sst: u8, sd: u32) -> Self {
        Self { sst, sd }
    }
}

impl fmt::Display for SliceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.sst, self.sd)
    }
}

impl FromStr for SliceId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::invariant("SliceId", format!("`{s}` is not of the form <sst>-<sd>"));
        let (sst, sd) = s.split_once('-').ok_or_else(bad)?;
        Ok(SliceId {
            sst: sst.trim().parse().map_err(|_| bad())?,
            sd: sd.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for SliceId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SliceId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The operator's high-level intention for one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceIntent {
    /// Optional display label such as `"S1"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub sst: u8,
    pub sd: u32,
    pub delay_min_ms: f64,
    pub delay_max_ms: f64,
    pub tp_min_mbps: f64,
    pub tp_max_mbps: f64,
    #[serde(default = "default_priority")]
    pub priority: u32,
}

fn default_priority() -> u32 {
    1
}

impl SliceIntent {
    pub fn id(&self) -> SliceId {
        SliceId::new(self.sst, self.sd)
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.id().to_string())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("delay_min_ms", self.delay_min_ms),
            ("delay_max_ms", self.delay_max_ms),
            ("tp_min_mbps", self.tp_min_mbps),
            ("tp_max_mbps", self.tp_max_mbps),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::invariant(
                    "SliceIntent",
                    format!("{name} must be finite and nonnegative (got {v})"),
                ));
            }
        }
        if self.delay_min_ms > self.delay_max_ms {
            return Err(ModelError::invariant("SliceIntent", "delay_min_ms must not exceed delay_max_ms"));
        }
        if self.tp_min_mbps > self.tp_max_mbps {
            return Err(ModelError::invariant("SliceIntent", "tp_min_mbps must not exceed tp_max_mbps"));
        }
        if self.priority < 1 {
            return Err(ModelError::invariant("SliceIntent", "priority must be at least 1"));
        }
        Ok(())
    }
}

/// Symbolic pool name, e.g. `"edge"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoolId(pub String);

impl PoolId {
    pub fn new(id: impl Into<String>) -> Self {
        PoolId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PoolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Edge,
    Regional,
    Central,
}

/// One data-center pool with its capacities and pay-as-you-go rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcPool {
    pub id: PoolId,
    pub tier: Tier,
    /// CPU milliseconds available per second of wall time.
    pub cpu_capacity_ms: f64,
    pub ram_capacity_gb: f64,
    /// Currency per 100 CPU-ms per hour.
    pub cpu_rate: f64,
    /// Currency per GB of RAM per hour.
    pub ram_rate: f64,
    /// Currency per GB transferred.
    pub bw_rate: f64,
    /// Workload-cluster baseline that is always running.
    pub fixed_overhead_cpu_ms: f64,
    #[serde(default)]
    pub fixed_overhead_ram_gb: f64,
    /// CPU held by the statically pinned shared NFs (DU, CU-CP, AMF, SMF).
    #[serde(default)]
    pub shared_nf_cpu_ms: f64,
    /// Admission multiplier on the data-plane budget. Values above 1 let the
    /// orchestrator admit more guaranteed load than the pool can serve at once.
    #[serde(default = "default_overcommit")]
    pub cpu_overcommit: f64,
    /// Marks the pool that runs the DU. Defaults to the single Edge pool.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hosts_du: bool,
}

fn default_overcommit() -> f64 {
    1.0
}

impl DcPool {
    /// CPU left for per-slice data-plane NFs once the baseline and shared NFs
    /// are accounted for.
    pub fn dataplane_budget_ms(&self) -> f64 {
        (self.cpu_capacity_ms - self.fixed_overhead_cpu_ms - self.shared_nf_cpu_ms).max(0.0)
    }

    /// CPU that admission control may promise to guaranteed slice demand.
    pub fn admission_cpu_ms(&self) -> f64 {
        self.dataplane_budget_ms() * self.cpu_overcommit
    }

    pub fn admission_ram_gb(&self) -> f64 {
        (self.ram_capacity_gb - self.fixed_overhead_ram_gb).max(0.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("cpu_capacity_ms", self.cpu_capacity_ms),
            ("ram_capacity_gb", self.ram_capacity_gb),
            ("cpu_rate", self.cpu_rate),
            ("ram_rate", self.ram_rate),
            ("bw_rate", self.bw_rate),
            ("fixed_overhead_cpu_ms", self.fixed_overhead_cpu_ms),
            ("fixed_overhead_ram_gb", self.fixed_overhead_ram_gb),
            ("shared_nf_cpu_ms", self.shared_nf_cpu_ms),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::invariant(
                    "DcPool",
                    format!("pool `{}`: {name} must be finite and nonnegative (got {v})", self.id),
                ));
            }
        }
        if self.fixed_overhead_cpu_ms + self.shared_nf_cpu_ms > self.cpu_capacity_ms {
            return Err(ModelError::invariant(
                "DcPool",
                format!("pool `{}`: fixed overhead plus shared NFs exceed cpu_capacity_ms", self.id),
            ));
        }
        if self.fixed_overhead_ram_gb > self.ram_capacity_gb {
            return Err(ModelError::invariant(
                "DcPool",
                format!("pool `{}`: fixed_overhead_ram_gb exceeds ram_capacity_gb", self.id),
            ));
        }
        if !self.cpu_overcommit.is_finite() || self.cpu_overcommit < 1.0 {
            return Err(ModelError::invariant(
                "DcPool",
                format!("pool `{}`: cpu_overcommit must be at least 1", self.id),
            ));
        }
        Ok(())
    }
}

/// Pools plus the one-way delays that connect them.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pools: Vec<DcPool>,
    /// Keyed by the unordered pair, smaller id first.
    links: BTreeMap<(PoolId, PoolId), f64>,
    du_pool: PoolId,
    pub radio_delay_ms: f64,
    pub core_delay_ms: f64,
}

/// An undirected link entry as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub a: PoolId,
    pub b: PoolId,
    pub delay_ms: f64,
}

fn pair_key(a: &PoolId, b: &PoolId) -> (PoolId, PoolId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

impl Topology {
    pub fn new(
        pools: Vec<DcPool>,
        links: &[Link],
        radio_delay_ms: f64,
        core_delay_ms: f64,
    ) -> Result<Self, ModelError> {
        if pools.is_empty() {
            return Err(ModelError::invariant("Topology", "at least one pool required"));
        }
        for p in &pools {
            p.validate()?;
        }
        for (name, v) in [("radio_delay_ms", radio_delay_ms), ("core_delay_ms", core_delay_ms)] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::invariant("Topology", format!("{name} must be finite and nonnegative")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &pools {
            if !seen.insert(p.id.clone()) {
                return Err(ModelError::invariant("Topology", format!("duplicate pool id `{}`", p.id)));
            }
        }

        let mut map = BTreeMap::new();
        for l in links {
            for end in [&l.a, &l.b] {
                if !seen.contains(end) {
                    return Err(ModelError::UnknownPool(end.0.clone()));
                }
            }
            if !l.delay_ms.is_finite() || l.delay_ms < 0.0 {
                return Err(ModelError::invariant(
                    "Topology",
                    format!("link {}<->{} delay must be finite and nonnegative", l.a, l.b),
                ));
            }
            if l.a == l.b {
                if l.delay_ms != 0.0 {
                    return Err(ModelError::invariant(
                        "Topology",
                        format!("link {0}<->{0} must have zero delay", l.a),
                    ));
                }
                continue;
            }
            let key = pair_key(&l.a, &l.b);
            if let Some(prev) = map.insert(key, l.delay_ms) {
                if prev != l.delay_ms {
                    return Err(ModelError::invariant(
                        "Topology",
                        format!("link {}<->{} given two different delays", l.a, l.b),
                    ));
                }
            }
        }
        for (i, a) in pools.iter().enumerate() {
            for b in &pools[i + 1..] {
                if !map.contains_key(&pair_key(&a.id, &b.id)) {
                    return Err(ModelError::invariant(
                        "Topology",
                        format!("missing link delay between `{}` and `{}`", a.id, b.id),
                    ));
                }
            }
        }

        let du_pool = Self::pick_du_pool(&pools)?;
        Ok(Topology {
            pools,
            links: map,
            du_pool,
            radio_delay_ms,
            core_delay_ms,
        })
    }

    fn pick_du_pool(pools: &[DcPool]) -> Result<PoolId, ModelError> {
        let marked: Vec<_> = pools.iter().filter(|p| p.hosts_du).collect();
        let du = match marked.as_slice() {
            [one] => *one,
            [] => {
                let edges: Vec<_> = pools.iter().filter(|p| p.tier == Tier::Edge).collect();
                match edges.as_slice() {
                    [one] => *one,
                    [] => return Err(ModelError::invariant("Topology", "an Edge pool must host the DU")),
                    _ => {
                        return Err(ModelError::invariant(
                            "Topology",
                            "several Edge pools: mark exactly one with hosts_du",
                        ))
                    }
                }
            }
            _ => return Err(ModelError::invariant("Topology", "exactly one pool may host the DU")),
        };
        if du.tier != Tier::Edge {
            return Err(ModelError::invariant("Topology", "the DU must be hosted by an Edge pool"));
        }
        Ok(du.id.clone())
    }

    pub fn pools(&self) -> &[DcPool] {
        &self.pools
    }

    pub fn pool(&self, id: &PoolId) -> Result<&DcPool, ModelError> {
        self.pools
            .iter()
            .find(|p| &p.id == id)
            .ok_or_else(|| ModelError::UnknownPool(id.0.clone()))
    }

    pub fn du_pool(&self) -> &PoolId {
        &self.du_pool
    }

    /// One-way delay between two pools; zero on the diagonal.
    pub fn link_delay(&self, a: &PoolId, b: &PoolId) -> Result<f64, ModelError> {
        self.pool(a)?;
        self.pool(b)?;
        if a == b {
            return Ok(0.0);
        }
        Ok(self.links[&pair_key(a, b)])
    }

    /// Links in canonical order, one entry per unordered pair.
    pub fn links(&self) -> Vec<Link> {
        self.links
            .iter()
            .map(|((a, b), d)| Link {
                a: a.clone(),
                b: b.clone(),
                delay_ms: *d,
            })
            .collect()
    }
}

/// Radio configuration of the single cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub total_prbs: u32,
    /// PRBs schedulable for slice data; the remainder is control overhead.
    pub prb_budget: u32,
    /// Cell throughput when the whole budget goes to one slice.
    pub cell_max_mbps: f64,
    #[serde(default = "default_quantum")]
    pub prb_quantum: u32,
}

fn default_quantum() -> u32 {
    5
}

impl CellConfig {
    pub fn mbps_per_prb(&self) -> f64 {
        self.cell_max_mbps / f64::from(self.prb_budget)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.prb_budget > self.total_prbs {
            return Err(ModelError::invariant("CellConfig", "prb_budget must not exceed total_prbs"));
        }
        if self.prb_quantum == 0 {
            return Err(ModelError::invariant("CellConfig", "prb_quantum must be positive"));
        }
        let mpp = self.mbps_per_prb();
        if !mpp.is_finite() || mpp <= 0.0 {
            return Err(ModelError::invariant(
                "CellConfig",
                "cell_max_mbps / prb_budget must be finite and positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NfType {
    #[serde(rename = "CU-UP")]
    CuUp,
    #[serde(rename = "UPF")]
    Upf,
    #[serde(rename = "CU-CP")]
    CuCp,
    #[serde(rename = "DU")]
    Du,
    #[serde(rename = "AMF")]
    Amf,
    #[serde(rename = "SMF")]
    Smf,
}

impl NfType {
    /// Per-slice user-plane functions; the rest are shared and pinned.
    pub fn is_data_plane(self) -> bool {
        matches!(self, NfType::CuUp | NfType::Upf)
    }
}

impl fmt::Display for NfType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NfType::CuUp => "CU-UP",
            NfType::Upf => "UPF",
            NfType::CuCp => "CU-CP",
            NfType::Du => "DU",
            NfType::Amf => "AMF",
            NfType::Smf => "SMF",
        })
    }
}

/// A single resource measurement of an NF at a given throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilePoint {
    pub throughput_mbps: f64,
    pub cpu_ms: f64,
    pub ram_mb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NfProfile {
    pub nf_type: NfType,
    pub points: Vec<ProfilePoint>,
    #[serde(default)]
    pub shared: bool,
}

impl NfProfile {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ty = "NfProfile";
        if self.nf_type.is_data_plane() && self.points.len() < 2 {
            return Err(ModelError::invariant(
                ty,
                format!("{}: data-plane profiles need at least two points", self.nf_type),
            ));
        }
        for p in &self.points {
            for v in [p.throughput_mbps, p.cpu_ms, p.ram_mb] {
                if !v.is_finite() || v < 0.0 {
                    return Err(ModelError::invariant(
                        ty,
                        format!("{}: measurements must be finite and nonnegative", self.nf_type),
                    ));
                }
            }
        }
        for w in self.points.windows(2) {
            if w[1].throughput_mbps <= w[0].throughput_mbps {
                return Err(ModelError::invariant(
                    ty,
                    format!("{}: points must be strictly increasing in throughput", self.nf_type),
                ));
            }
            if w[1].cpu_ms < w[0].cpu_ms {
                return Err(ModelError::invariant(
                    ty,
                    format!("{}: points must be nondecreasing in cpu_ms", self.nf_type),
                ));
            }
        }
        Ok(())
    }

    /// RAM demand in GB: the largest RAM reading across the profile, since the
    /// measurements barely move with traffic.
    pub fn ram_demand_gb(&self) -> f64 {
        self.points.iter().map(|p| p.ram_mb).fold(0.0, f64::max) / 1000.0
    }
}

/// NSI lifecycle phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Lifecycle {
    Preparation,
    Commissioning,
    Operation,
    Decommissioning,
    Terminated,
}

impl Lifecycle {
    pub const ALL: [Lifecycle; 5] = [
        Lifecycle::Preparation,
        Lifecycle::Commissioning,
        Lifecycle::Operation,
        Lifecycle::Decommissioning,
        Lifecycle::Terminated,
    ];

    /// The only legal successor, if any.
    pub fn next(self) -> Option<Lifecycle> {
        match self {
            Lifecycle::Preparation => Some(Lifecycle::Commissioning),
            Lifecycle::Commissioning => Some(Lifecycle::Operation),
            Lifecycle::Operation => Some(Lifecycle::Decommissioning),
            Lifecycle::Decommissioning => Some(Lifecycle::Terminated),
            Lifecycle::Terminated => None,
        }
    }

    pub fn has_placement(self) -> bool {
        matches!(
            self,
            Lifecycle::Commissioning | Lifecycle::Operation | Lifecycle::Decommissioning
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceState {
    pub intent: SliceIntent,
    pub lifecycle: Lifecycle,
    pub placement: Option<Placement>,
}

impl SliceState {
    pub fn new(intent: SliceIntent) -> Self {
        SliceState {
            intent,
            lifecycle: Lifecycle::Preparation,
            placement: None,
        }
    }

    /// Attaches a placement and moves Preparation -> Commissioning.
    pub fn commission(self, placement: Placement) -> Result<SliceState, ModelError> {
        let mut next = validate_transition(self, Lifecycle::Commissioning)?;
        next.placement = Some(placement);
        Ok(next)
    }

    pub fn is_consistent(&self) -> bool {
        self.placement.is_some() == self.lifecycle.has_placement()
    }
}

/// Moves `state` to `target` if that is the next lifecycle phase.
///
/// Entering `Terminated` drops the placement.
pub fn validate_transition(state: SliceState, target: Lifecycle) -> Result<SliceState, ModelError> {
    if state.lifecycle.next() != Some(target) {
        return Err(ModelError::IllegalTransition {
            from: state.lifecycle,
            to: target,
        });
    }
    let mut next = state;
    next.lifecycle = target;
    if target == Lifecycle::Terminated {
        next.placement = None;
    }
    Ok(next)
}
