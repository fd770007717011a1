use std::io::{self, Write};

use serde::Serialize;

use super::MetricsFrame;

#[derive(Serialize)]
struct Row<'a> {
    t_ms: u64,
    frame: u64,
    slice: String,
    name: &'a str,
    pool_cuup: &'a str,
    pool_upf: &'a str,
    demand_mbps: f64,
    granted_prbs: f64,
    achieved_mbps: f64,
    rtt_ms: f64,
    cuup_quota_ms: f64,
    upf_quota_ms: f64,
    cuup_cpu_ms: f64,
    upf_cpu_ms: f64,
    tp_violation_pct: f64,
    delay_violated: bool,
    assurance: bool,
    cumulative_cost: f64,
}

/// One row per slice per frame.
pub fn write_frames_csv<W: Write>(frames: &[MetricsFrame], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for f in frames {
        for s in &f.slices {
            w.serialize(Row {
                t_ms: f.t_ms,
                frame: f.seq,
                slice: s.slice.to_string(),
                name: &s.name,
                pool_cuup: &s.pool_cuup.0,
                pool_upf: &s.pool_upf.0,
                demand_mbps: s.demand_mbps,
                granted_prbs: s.granted_prbs,
                achieved_mbps: s.achieved_mbps,
                rtt_ms: s.rtt_ms,
                cuup_quota_ms: s.cuup_quota_ms,
                upf_quota_ms: s.upf_quota_ms,
                cuup_cpu_ms: s.cuup_cpu_ms,
                upf_cpu_ms: s.upf_cpu_ms,
                tp_violation_pct: s.tp_violation_pct,
                delay_violated: s.delay_violated,
                assurance: f.assurance_enabled,
                cumulative_cost: f.cumulative_cost,
            })
            .map_err(io::Error::other)?;
        }
    }
    w.flush()
}

pub fn frames_csv(frames: &[MetricsFrame]) -> String {
    let mut buf = Vec::new();
    write_frames_csv(frames, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// One JSON document per line.
pub fn write_jsonl<W: Write, T: Serialize>(items: &[T], mut out: W) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
