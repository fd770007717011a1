//! Scenario documents: topology, cell, NF profiles and a timeline of slice
//! and traffic events.
//!
//! Scenarios are written as TOML for people and serialized canonically as
//! JSON. Both go through the same schema, so paths in error messages look
//! alike regardless of the input format.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::assurance::AssuranceConfig;
use crate::compute::ComputeModel;
use crate::error::ModelError;
use crate::model::{CellConfig, DcPool, Link, NfProfile, SliceId, SliceIntent, Topology};

/// Something that happens to the simulated network at a point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEvent {
    SliceStart { intent: SliceIntent },
    SliceStop { slice: SliceId },
    /// Offered load of a slice; defaults to its `tp_max_mbps`.
    TrafficDemand { slice: SliceId, mbps: f64 },
    AssuranceToggle { enabled: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t_ms: u64,
    #[serde(flatten)]
    pub event: SimEvent,
}

/// On-disk shape of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    pub horizon_ms: u64,
    #[serde(default = "default_tick")]
    pub tick_ms: u64,
    pub radio_delay_ms: f64,
    pub core_delay_ms: f64,
    pub pools: Vec<DcPool>,
    #[serde(default)]
    pub links: Vec<Link>,
    pub cell: CellConfig,
    pub nf_profiles: Vec<NfProfile>,
    #[serde(default)]
    pub assurance: AssuranceConfig,
    #[serde(default)]
    pub events: Vec<TimedEvent>,
}

fn default_tick() -> u64 {
    1000
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub horizon_ms: u64,
    pub tick_ms: u64,
    pub topology: Topology,
    pub cell: CellConfig,
    pub profiles: Vec<NfProfile>,
    pub compute: ComputeModel,
    pub assurance: AssuranceConfig,
    /// Sorted by time; same-time events keep document order.
    pub events: Vec<TimedEvent>,
}

/// Parses and validates a scenario from TOML or JSON text.
pub fn load_scenario(text: &str) -> Result<Scenario, ModelError> {
    let value: serde_json::Value = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| ModelError::Schema {
            path: "<document>".into(),
            message: e.to_string(),
        })?
    } else {
        let table: toml::Table = toml::from_str(text).map_err(|e| ModelError::Schema {
            path: "<document>".into(),
            message: e.to_string(),
        })?;
        serde_json::to_value(table).map_err(|e| ModelError::Schema {
            path: "<document>".into(),
            message: e.to_string(),
        })?
    };
    let doc: ScenarioDoc = serde_path_to_error::deserialize(value).map_err(|e| ModelError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    Scenario::from_doc(doc)
}

impl Scenario {
    pub fn from_doc(doc: ScenarioDoc) -> Result<Self, ModelError> {
        if doc.tick_ms == 0 {
            return Err(ModelError::invariant("Scenario", "tick_ms must be positive"));
        }
        let topology = Topology::new(doc.pools, &doc.links, doc.radio_delay_ms, doc.core_delay_ms)?;
        doc.cell.validate()?;
        for p in &doc.nf_profiles {
            p.validate()?;
        }
        let compute = ComputeModel::from_profiles(&doc.nf_profiles)?;
        if doc.assurance.control_period_ms == 0 {
            return Err(ModelError::invariant("AssuranceConfig", "control_period_ms must be positive"));
        }

        let mut events = doc.events;
        events.sort_by_key(|e| e.t_ms);
        check_timeline(&events)?;

        Ok(Scenario {
            name: doc.name,
            horizon_ms: doc.horizon_ms,
            tick_ms: doc.tick_ms,
            topology,
            cell: doc.cell,
            profiles: doc.nf_profiles,
            compute,
            assurance: doc.assurance,
            events,
        })
    }

    pub fn to_doc(&self) -> ScenarioDoc {
        ScenarioDoc {
            name: self.name.clone(),
            horizon_ms: self.horizon_ms,
            tick_ms: self.tick_ms,
            radio_delay_ms: self.topology.radio_delay_ms,
            core_delay_ms: self.topology.core_delay_ms,
            pools: self.topology.pools().to_vec(),
            links: self.topology.links(),
            cell: self.cell.clone(),
            nf_profiles: self.profiles.clone(),
            assurance: self.assurance.clone(),
            events: self.events.clone(),
        }
    }

    /// Canonical JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("scenario documents always serialize")
    }

    pub fn slice_starts(&self) -> impl Iterator<Item = &SliceIntent> {
        self.events.iter().filter_map(|e| match &e.event {
            SimEvent::SliceStart { intent } => Some(intent),
            _ => None,
        })
    }
}

/// Intents must be valid and no two live slices may share an S-NSSAI.
fn check_timeline(events: &[TimedEvent]) -> Result<(), ModelError> {
    let mut live = BTreeSet::new();
    for e in events {
        match &e.event {
            SimEvent::SliceStart { intent } => {
                intent.validate()?;
                if !live.insert(intent.id()) {
                    return Err(ModelError::DuplicateSnssai(intent.id()));
                }
            }
            SimEvent::SliceStop { slice } => {
                live.remove(slice);
            }
            SimEvent::TrafficDemand { mbps, .. } => {
                if !mbps.is_finite() || *mbps < 0.0 {
                    return Err(ModelError::invariant("SimEvent", "traffic demand must be finite and nonnegative"));
                }
            }
            SimEvent::AssuranceToggle { .. } => {}
        }
    }
    Ok(())
}

/// Scenarios shipped with the crate.
pub mod bundled {
    use super::{load_scenario, Scenario};

    pub const EXP1: &str = include_str!("../scenarios/exp1.scenario");
    pub const EXP2: &str = include_str!("../scenarios/exp2.scenario");

    /// Four slices brought up one after another across three pools.
    pub fn exp1() -> Scenario {
        load_scenario(EXP1).expect("bundled exp1 scenario is valid")
    }

    /// Three Edge slices contending for CPU, with assurance switched on late.
    pub fn exp2() -> Scenario {
        load_scenario(EXP2).expect("bundled exp2 scenario is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp1_shape() {
        let sc = bundled::exp1();
        assert_eq!(sc.topology.pools().len(), 3);
        let starts: Vec<_> = sc.slice_starts().map(|i| i.label()).collect();
        assert_eq!(starts, ["S1", "S2", "S3", "S4"]);
        assert!(sc.events.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));
    }

    #[test]
    fn exp2_shape() {
        let sc = bundled::exp2();
        assert_eq!(sc.slice_starts().count(), 5);
        assert!(!sc.assurance.enabled);
    }

    #[test]
    fn empty_pools_rejected() {
        let mut doc = bundled::exp1().to_doc();
        doc.pools.clear();
        doc.links.clear();
        let text = serde_json::to_string(&doc).unwrap();
        let err = load_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("at least one pool required"), "{err}");
    }

    #[test]
    fn duplicate_snssai_rejected() {
        let mut doc = bundled::exp1().to_doc();
        let first = doc.events[0].clone();
        doc.events.push(TimedEvent { t_ms: 1000, ..first });
        let err = load_scenario(&serde_json::to_string(&doc).unwrap()).unwrap_err();
        assert_eq!(err, ModelError::DuplicateSnssai(SliceId::new(1, 1)));
    }

    #[test]
    fn restart_after_stop_is_allowed() {
        let mut doc = bundled::exp1().to_doc();
        let first = doc.events[0].clone();
        doc.events.push(TimedEvent {
            t_ms: 2000,
            event: SimEvent::SliceStop { slice: SliceId::new(1, 1) },
        });
        doc.events.push(TimedEvent { t_ms: 3000, ..first });
        assert!(load_scenario(&serde_json::to_string(&doc).unwrap()).is_ok());
    }

    #[test]
    fn schema_errors_name_the_path() {
        let text = bundled::EXP1.replace("cpu_capacity_ms = 500", "cpu_capacity_ms = \"lots\"");
        let err = load_scenario(&text).unwrap_err();
        match err {
            ModelError::Schema { path, .. } => assert_eq!(path, "pools[0].cpu_capacity_ms"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invariant_errors_name_the_type() {
        let text = bundled::EXP1.replace("delay_min_ms = 50.0", "delay_min_ms = 500.0");
        let err = load_scenario(&text).unwrap_err();
        assert!(err.to_string().starts_with("SliceIntent"), "{err}");
    }

    #[test]
    fn unknown_fields_are_schema_errors() {
        let text = bundled::EXP1.replacen("tick_ms = 1000", "tick_ms = 1000\nspeed = 3", 1);
        assert!(matches!(load_scenario(&text), Err(ModelError::Schema { .. })));
    }

    #[test]
    fn canonical_json_reparses() {
        for sc in [bundled::exp1(), bundled::exp2()] {
            let again = load_scenario(&sc.to_json()).unwrap();
            assert_eq!(again, sc);
        }
    }

    #[test]
    fn events_sorted_stably() {
        let mut doc = bundled::exp1().to_doc();
        doc.events.reverse();
        let sc = Scenario::from_doc(doc).unwrap();
        let times: Vec<_> = sc.events.iter().map(|e| e.t_ms).collect();
        let mut sorted = times.clone();
        sorted.sort();
        assert_eq!(times, sorted);
    }
}
