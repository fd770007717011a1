use proptest::prelude::*;
use slicing_core::assurance::{fair_share_baseline, rebalance, PoolSlice};
use slicing_core::model::{SliceId, SliceIntent};
use slicing_core::scenario::{bundled, SimEvent, TimedEvent};
use slicing_core::sim::{frames_csv, validate_frame, Engine, EngineOptions, LogEntry};

fn at(frames: &[slicing_core::MetricsFrame], t_ms: u64) -> &slicing_core::MetricsFrame {
    frames.iter().find(|f| f.t_ms == t_ms).unwrap()
}

#[test]
fn exp1_plateaus() {
    let sc = bundled::exp1();
    let out = Engine::run(&sc, EngineOptions::default());
    let stages: [(u64, &[f64]); 4] = [
        (10_000, &[250.0]),
        (100_000, &[125.0, 125.0]),
        (200_000, &[250.0 / 3.0; 3]),
        (300_000, &[75.0, 75.0, 50.0, 50.0]),
    ];
    for (t, want) in stages {
        let got: Vec<f64> = at(&out.frames, t).slices.iter().map(|s| s.achieved_mbps).collect();
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-9, "t={t}: {got:?}");
        }
    }
    for f in &out.frames {
        assert!(f.slices.iter().all(|s| s.tp_violation_pct == 0.0 && !s.delay_violated));
    }
}

#[test]
fn exp2_baseline_and_assured() {
    let sc = bundled::exp2();
    let out = Engine::run(&sc, EngineOptions::default());
    let s = |n: u32| SliceId::new(1, n);
    let base = at(&out.frames, 90_000);
    let s5 = base.slice(s(5)).unwrap();
    assert!((s5.achieved_mbps - 29.31).abs() < 0.01);
    assert!((s5.tp_violation_pct - 67.43).abs() < 0.01);

    let managed = at(&out.frames, 150_000);
    let tp: Vec<f64> = (3..=5).map(|i| managed.slice(s(i)).unwrap().achieved_mbps).collect();
    let v: Vec<f64> = (3..=5).map(|i| managed.slice(s(i)).unwrap().tp_violation_pct).collect();
    for (g, w) in tp.iter().zip([13.69, 20.59, 65.66]) {
        assert!((g - w).abs() < 0.01, "{tp:?}");
    }
    assert!(v[2] < v[1] && v[1] < v[0], "{v:?}");
}

#[test]
fn no_assurance_keeps_baseline() {
    let sc = bundled::exp2();
    let out = Engine::run(&sc, EngineOptions { disable_assurance: true, ..Default::default() });
    let f = at(&out.frames, 150_000);
    assert!(!f.assurance_enabled);
    assert!((f.slice(SliceId::new(1, 5)).unwrap().achieved_mbps - 29.31).abs() < 0.01);
    assert!(!out.log.iter().any(|r| matches!(r.entry, LogEntry::O1Reconfig { .. })));
}

#[test]
fn runs_are_byte_identical() {
    for sc in [bundled::exp1(), bundled::exp2()] {
        let a = Engine::run(&sc, EngineOptions::default());
        let b = Engine::run(&sc, EngineOptions::default());
        assert_eq!(frames_csv(&a.frames), frames_csv(&b.frames));
        assert_eq!(serde_json::to_string(&a.log).unwrap(), serde_json::to_string(&b.log).unwrap());
    }
}

#[test]
fn assurance_reconfigures_once() {
    let out = Engine::run(&bundled::exp2(), EngineOptions::default());
    let o1: Vec<u64> = out
        .log
        .iter()
        .filter(|r| matches!(r.entry, LogEntry::O1Reconfig { .. }))
        .map(|r| r.t_ms)
        .collect();
    assert!(!o1.is_empty());
    assert!(o1.iter().all(|t| *t == 120_000), "{o1:?}");
}

fn pool_slice(sd: u32, priority: u32, tp_min: f64) -> PoolSlice {
    PoolSlice {
        slice: SliceId::new(1, sd),
        priority,
        tp_min_mbps: tp_min,
        cap_mbps: 250.0,
        has_cuup: true,
        has_upf: true,
    }
}

#[derive(Debug, Clone)]
struct Load {
    sd: u32,
    t_ms: u64,
    tp_min: f64,
    priority: u32,
    demand: Option<f64>,
    stop: Option<u64>,
}

fn load() -> impl Strategy<Value = Vec<Load>> {
    proptest::collection::vec(
        (0u64..20, 1.0..60.0f64, 1u32..4, proptest::option::of(0.0..120.0f64), proptest::option::of(0u64..20)),
        1..7,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (t, tp_min, priority, demand, stop))| Load {
                sd: i as u32 + 1,
                t_ms: t * 1000,
                tp_min,
                priority,
                demand,
                stop: stop.map(|s| (t + 1 + s) * 1000),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_runs_produce_valid_frames(loads in load(), assured in any::<bool>()) {
        let mut sc = bundled::exp2();
        sc.events.clear();
        sc.horizon_ms = 45_000;
        sc.assurance.enabled = assured;
        for l in &loads {
            let intent = SliceIntent {
                name: None,
                sst: 1,
                sd: l.sd,
                delay_min_ms: 0.0,
                delay_max_ms: 30.0,
                tp_min_mbps: l.tp_min,
                tp_max_mbps: 120.0,
                priority: l.priority,
            };
            sc.events.push(TimedEvent { t_ms: l.t_ms, event: SimEvent::SliceStart { intent } });
            if let Some(d) = l.demand {
                sc.events.push(TimedEvent { t_ms: l.t_ms + 500, event: SimEvent::TrafficDemand { slice: SliceId::new(1, l.sd), mbps: d } });
            }
            if let Some(s) = l.stop {
                sc.events.push(TimedEvent { t_ms: s, event: SimEvent::SliceStop { slice: SliceId::new(1, l.sd) } });
            }
        }
        sc.events.sort_by_key(|e| e.t_ms);
        let out = Engine::run(&sc, EngineOptions::default());
        prop_assert_eq!(out.frames.len(), 45);
        for f in &out.frames {
            if let Err(e) = validate_frame(f, &sc.topology, &sc.cell, &sc.compute) {
                prop_assert!(false, "{}", e);
            }
        }
        let again = Engine::run(&sc, EngineOptions::default());
        prop_assert_eq!(frames_csv(&out.frames), frames_csv(&again.frames));
    }

    #[test]
    fn rebalance_shares_by_weight(
        specs in proptest::collection::vec((1u32..4, 5.0..100.0f64), 2..6),
        budget in 10.0..400.0f64,
    ) {
        let sc = bundled::exp2();
        let slices: Vec<PoolSlice> = specs.iter().enumerate().map(|(i, (p, t))| pool_slice(i as u32, *p, *t)).collect();
        let plan = rebalance(&slices, &sc.compute, budget);
        let used: f64 = plan.values().map(|p| p.quotas.total()).sum();
        prop_assert!(used <= budget + 1e-6);
        let need = |s: &PoolSlice| sc.compute.slice_cpu_demand(s.tp_min_mbps).total();
        for a in &slices {
            let qa = plan[&a.slice];
            prop_assert!(qa.target_mbps <= a.tp_min_mbps + 1e-9);
            for b in &slices {
                let qb = plan[&b.slice];
                // Two slices both short of their floor get CPU in proportion to weight.
                if qa.target_mbps < a.tp_min_mbps - 1e-6 && qb.target_mbps < b.tp_min_mbps - 1e-6 {
                    let wa = f64::from(a.priority) * a.tp_min_mbps;
                    let wb = f64::from(b.priority) * b.tp_min_mbps;
                    prop_assert!((qa.quotas.total() / qb.quotas.total() - wa / wb).abs() < 1e-4 * (wa / wb));
                }
            }
        }
        if slices.iter().map(need).sum::<f64>() <= budget {
            for s in &slices {
                prop_assert!((plan[&s.slice].target_mbps - s.tp_min_mbps).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn top_slice_violates_least(
        specs in proptest::collection::vec((1u32..3, 5.0..60.0f64), 1..5),
        top_extra in 1.0..40.0f64,
        budget in 10.0..300.0f64,
    ) {
        let sc = bundled::exp2();
        let max_tp = specs.iter().map(|s| s.1).fold(0.0, f64::max);
        let mut slices: Vec<PoolSlice> = specs.iter().enumerate().map(|(i, (p, t))| pool_slice(i as u32, *p, *t)).collect();
        slices.push(pool_slice(99, 3, max_tp + top_extra));
        let plan = rebalance(&slices, &sc.compute, budget);
        let viol = |s: &PoolSlice| 1.0 - plan[&s.slice].target_mbps / s.tp_min_mbps;
        let top = viol(slices.last().unwrap());
        for s in &slices[..slices.len() - 1] {
            prop_assert!(top <= viol(s) + 1e-6, "top {} vs {}", top, viol(s));
        }
    }

    #[test]
    fn higher_priority_violates_no_more(
        tp in 5.0..80.0f64,
        prios in proptest::collection::vec(1u32..5, 2..6),
        budget in 10.0..400.0f64,
    ) {
        let sc = bundled::exp2();
        let slices: Vec<PoolSlice> = prios.iter().enumerate().map(|(i, p)| pool_slice(i as u32, *p, tp)).collect();
        let plan = rebalance(&slices, &sc.compute, budget);
        let viol = |s: &PoolSlice| (1.0 - plan[&s.slice].target_mbps / tp).max(0.0);
        for a in &slices {
            for b in &slices {
                if a.priority > b.priority {
                    prop_assert!(viol(a) <= viol(b) + 1e-9);
                    if viol(b) > 1e-6 && viol(a) > 1e-6 {
                        prop_assert!(viol(a) < viol(b));
                    }
                }
            }
        }
    }

    #[test]
    fn top_slice_beats_fair_share(
        specs in proptest::collection::vec((1u32..3, 5.0..60.0f64), 1..5),
        top_extra in 0.0..40.0f64,
        budget in 10.0..300.0f64,
    ) {
        let sc = bundled::exp2();
        let max_tp = specs.iter().map(|s| s.1).fold(0.0, f64::max);
        let mut slices: Vec<PoolSlice> = specs.iter().enumerate().map(|(i, (p, t))| pool_slice(i as u32, *p, *t)).collect();
        let top = pool_slice(99, 3, max_tp + top_extra);
        slices.push(top.clone());
        let managed = rebalance(&slices, &sc.compute, budget)[&top.slice].target_mbps;
        let fair = sc.compute.slice_throughput(&fair_share_baseline(&slices, budget)[&top.slice]);
        let viol = |x: f64| (1.0 - x / top.tp_min_mbps).max(0.0);
        prop_assert!(viol(managed) <= viol(fair) + 1e-6, "managed {} fair {}", managed, fair);
    }
}
