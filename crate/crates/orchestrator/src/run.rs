//! Batch runs and run directories.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slicing_core::model::SliceId;
use slicing_core::scenario::{bundled, load_scenario, Scenario};
use slicing_core::sim::{write_frames_csv, write_jsonl, Engine, EngineOptions, LogEntry, LogRecord, RunOutput};
use slicing_core::{MetricsFrame, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: ModelError },
}

/// Loads a scenario file. The names `exp1` and `exp2` fall back to the
/// bundled scenarios when no such file exists.
pub fn read_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => match path.to_str() {
            Some("exp1") => bundled::EXP1.to_string(),
            Some("exp2") => bundled::EXP2.to_string(),
            _ => {
                return Err(ScenarioError::Read {
                    path: path.into(),
                    source: e,
                })
            }
        },
        Err(e) => {
            return Err(ScenarioError::Read {
                path: path.into(),
                source: e,
            })
        }
    };
    load_scenario(&text).map_err(|source| ScenarioError::Invalid {
        path: path.into(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub slice: SliceId,
    pub name: String,
    pub frames: u64,
    pub mean_mbps: f64,
    pub mean_violation_pct: f64,
    pub max_violation_pct: f64,
    pub violated_frames: u64,
    pub delay_violated_frames: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub frames: u64,
    pub assurance_disabled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub slices: Vec<SliceSummary>,
    pub rejections: u64,
    /// Slice-frames with a throughput or delay violation.
    pub violations: u64,
    pub total_cost: f64,
}

pub fn summarize(name: &str, frames: &[MetricsFrame], log: &[LogRecord]) -> Summary {
    let mut per: BTreeMap<SliceId, SliceSummary> = BTreeMap::new();
    for f in frames {
        for s in &f.slices {
            let e = per.entry(s.slice).or_insert_with(|| SliceSummary {
                slice: s.slice,
                name: s.name.clone(),
                frames: 0,
                mean_mbps: 0.0,
                mean_violation_pct: 0.0,
                max_violation_pct: 0.0,
                violated_frames: 0,
                delay_violated_frames: 0,
            });
            e.frames += 1;
            e.mean_mbps += s.achieved_mbps;
            e.mean_violation_pct += s.tp_violation_pct;
            e.max_violation_pct = e.max_violation_pct.max(s.tp_violation_pct);
            e.violated_frames += u64::from(s.tp_violation_pct > 0.0);
            e.delay_violated_frames += u64::from(s.delay_violated);
        }
    }
    let slices = per
        .into_values()
        .map(|mut s| {
            s.mean_mbps /= s.frames as f64;
            s.mean_violation_pct /= s.frames as f64;
            s
        })
        .collect();
    let violations = frames
        .iter()
        .flat_map(|f| &f.slices)
        .filter(|s| s.tp_violation_pct > 0.0 || s.delay_violated)
        .count() as u64;
    Summary {
        scenario: name.to_string(),
        frames: frames.len() as u64,
        assurance_disabled: false,
        seed: None,
        slices,
        rejections: log
            .iter()
            .filter(|r| matches!(r.entry, LogEntry::SliceRejected { .. }))
            .count() as u64,
        violations,
        total_cost: frames.last().map_or(0.0, |f| f.cumulative_cost),
    }
}

/// Writes `scenario.json`, `events.jsonl`, `frames.csv`, `frames.jsonl` and
/// `summary.json` into `dir`.
pub fn write_run_dir(dir: &Path, scenario: &Scenario, out: &RunOutput, summary: &Summary) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("scenario.json"), scenario.to_json())?;
    write_jsonl(&out.log, BufWriter::new(File::create(dir.join("events.jsonl"))?))?;
    write_frames_csv(&out.frames, BufWriter::new(File::create(dir.join("frames.csv"))?))?;
    write_jsonl(&out.frames, BufWriter::new(File::create(dir.join("frames.jsonl"))?))?;
    let mut text = serde_json::to_string_pretty(summary).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)
}

pub struct BatchResult {
    pub output: RunOutput,
    pub summary: Summary,
}

pub fn run_batch(scenario: &Scenario, options: EngineOptions, seed: Option<u64>) -> BatchResult {
    let output = Engine::run(scenario, options);
    let mut summary = summarize(&scenario.name, &output.frames, &output.log);
    summary.assurance_disabled = options.disable_assurance;
    summary.seed = seed;
    BatchResult { output, summary }
}
