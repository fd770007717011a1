use std::fmt;

use serde::{Deserialize, Serialize};

use crate::compute::NfQuotas;
use crate::model::{Lifecycle, SliceId, SliceIntent};
use crate::placement::Placement;

/// Why an event was turned away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", content = "detail")]
pub enum RejectReason {
    DuplicateSnssai,
    Malformed(String),
    SlaUnsatisfiable,
    NoFeasiblePlacement,
    AdmissionOverflow,
    UnknownSlice,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::DuplicateSnssai => f.write_str("duplicate S-NSSAI"),
            RejectReason::Malformed(m) => write!(f, "malformed intent: {m}"),
            RejectReason::SlaUnsatisfiable => f.write_str("throughput floor exceeds the cell maximum"),
            RejectReason::NoFeasiblePlacement => f.write_str("no feasible placement"),
            RejectReason::AdmissionOverflow => f.write_str("guaranteed PRBs would exceed the cell budget"),
            RejectReason::UnknownSlice => f.write_str("unknown slice"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum LogEntry {
    /// Placement decided; the slice is now commissioning.
    SliceAdmitted { intent: SliceIntent, placement: Placement },
    SliceRejected {
        slice: SliceId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intent: Option<SliceIntent>,
        reason: RejectReason,
    },
    LifecycleChanged { slice: SliceId, from: Lifecycle, to: Lifecycle },
    /// PRB floor and cap sent to the radio scheduler.
    A1Policy { slice: SliceId, floor: u32, cap: f64 },
    /// CPU quota change pushed to a slice's NFs.
    O1Reconfig { slice: SliceId, quotas: NfQuotas },
    TrafficDemand { slice: SliceId, mbps: f64 },
    AssuranceToggled { requested: bool, enabled: bool },
}

/// A log entry with its place in the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub t_ms: u64,
    #[serde(flatten)]
    pub entry: LogEntry,
}
