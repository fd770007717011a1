//! The reconcile log: what the orchestrator decided for each intent, in
//! order. Replaying it rebuilds the control state of a session.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use slicing_core::compute::NfQuotas;
use slicing_core::model::{Lifecycle, SliceId, SliceIntent};
use slicing_core::placement::Placement;
use slicing_core::sim::{ControlState, LogEntry, LogRecord, RejectReason};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Admit { placement: Placement },
    Reject { reason: RejectReason },
    Resize { quotas: NfQuotas },
    Policy { floor: u32, cap: f64 },
    Decommission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconcileRecord {
    pub sequence: u64,
    pub t_ms: u64,
    pub slice: SliceId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<SliceIntent>,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("record {0}: sequence does not increase")]
    OutOfOrder(u64),
    #[error("record {sequence}: slice {slice} is not admitted")]
    NotAdmitted { sequence: u64, slice: SliceId },
    #[error("record {sequence}: slice {slice} is already admitted")]
    AlreadyAdmitted { sequence: u64, slice: SliceId },
}

/// Turns engine log records into reconcile records.
#[derive(Debug, Clone, Default)]
pub struct Projector {
    next: u64,
    intents: BTreeMap<SliceId, SliceIntent>,
}

impl Projector {
    pub fn project(&mut self, record: &LogRecord) -> Option<ReconcileRecord> {
        let (slice, intent, action) = match &record.entry {
            LogEntry::SliceAdmitted { intent, placement } => {
                self.intents.insert(intent.id(), intent.clone());
                (
                    intent.id(),
                    Some(intent.clone()),
                    Action::Admit {
                        placement: placement.clone(),
                    },
                )
            }
            LogEntry::SliceRejected { slice, intent, reason } => (
                *slice,
                intent.clone(),
                Action::Reject {
                    reason: reason.clone(),
                },
            ),
            LogEntry::O1Reconfig { slice, quotas } => (*slice, self.intents.get(slice).cloned(), Action::Resize { quotas: *quotas }),
            LogEntry::A1Policy { slice, floor, cap } => (
                *slice,
                self.intents.get(slice).cloned(),
                Action::Policy {
                    floor: *floor,
                    cap: *cap,
                },
            ),
            LogEntry::LifecycleChanged {
                slice,
                to: Lifecycle::Terminated,
                ..
            } => (*slice, self.intents.remove(slice), Action::Decommission),
            _ => return None,
        };
        let out = ReconcileRecord {
            sequence: self.next,
            t_ms: record.t_ms,
            slice,
            intent,
            action,
        };
        self.next += 1;
        Some(out)
    }

    pub fn project_all(&mut self, records: &[LogRecord]) -> Vec<ReconcileRecord> {
        records.iter().filter_map(|r| self.project(r)).collect()
    }
}

/// Rebuilds per-slice control state from a reconcile log.
pub fn replay(records: &[ReconcileRecord]) -> Result<BTreeMap<SliceId, ControlState>, ReplayError> {
    let mut state: BTreeMap<SliceId, ControlState> = BTreeMap::new();
    let mut last: Option<u64> = None;
    for r in records {
        if last.is_some_and(|l| r.sequence <= l) {
            return Err(ReplayError::OutOfOrder(r.sequence));
        }
        last = Some(r.sequence);
        let not_admitted = || ReplayError::NotAdmitted {
            sequence: r.sequence,
            slice: r.slice,
        };
        match &r.action {
            Action::Admit { placement } => {
                if state.contains_key(&r.slice) {
                    return Err(ReplayError::AlreadyAdmitted {
                        sequence: r.sequence,
                        slice: r.slice,
                    });
                }
                let intent = r.intent.clone().ok_or_else(not_admitted)?;
                state.insert(
                    r.slice,
                    ControlState {
                        intent,
                        lifecycle: Lifecycle::Operation,
                        placement: placement.clone(),
                        quotas: placement.cpu_quota,
                        prb_floor: 0,
                        prb_cap: 0.0,
                    },
                );
            }
            Action::Reject { .. } => {}
            Action::Resize { quotas } => state.get_mut(&r.slice).ok_or_else(not_admitted)?.quotas = *quotas,
            Action::Policy { floor, cap } => {
                let s = state.get_mut(&r.slice).ok_or_else(not_admitted)?;
                s.prb_floor = *floor;
                s.prb_cap = *cap;
            }
            Action::Decommission => {
                state.remove(&r.slice).ok_or_else(not_admitted)?;
            }
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use slicing_core::scenario::bundled;
    use slicing_core::sim::{Engine, EngineOptions};

    #[test]
    fn replay_matches_engine() {
        for sc in [bundled::exp1(), bundled::exp2()] {
            let mut engine = Engine::new(&sc, EngineOptions::default());
            let mut proj = Projector::default();
            let mut log = Vec::new();
            while let Some(step) = engine.step() {
                log.extend(proj.project_all(&step.records));
                assert_eq!(replay(&log).unwrap(), engine.control_state());
            }
        }
    }

    #[test]
    fn resize_before_admit_is_refused() {
        let r = ReconcileRecord {
            sequence: 0,
            t_ms: 0,
            slice: SliceId::new(1, 1),
            intent: None,
            action: Action::Resize {
                quotas: NfQuotas::default(),
            },
        };
        assert!(matches!(replay(&[r]), Err(ReplayError::NotAdmitted { .. })));
    }
}
