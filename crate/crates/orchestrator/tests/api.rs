use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use slicing_core::scenario::{bundled, SimEvent};
use sliceorch::{api, Session, SessionConfig};
use tower::ServiceExt;

fn exp2_without_s5() -> slicing_core::Scenario {
    let mut sc = bundled::exp2();
    sc.events.retain(|e| !matches!(&e.event, SimEvent::SliceStart { intent } if intent.sd == 5));
    sc
}

fn s5() -> Value {
    json!({"name": "S5", "sst": 1, "sd": 5, "delay_min_ms": 10.0, "delay_max_ms": 30.0,
           "tp_min_mbps": 90.0, "tp_max_mbps": 250.0, "priority": 3})
}

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

#[tokio::test]
async fn s5_joins_running_exp2_at_edge() {
    let s = Session::spawn(&exp2_without_s5(), SessionConfig::default());
    let app = api::router(s.clone());
    let (st, frames) = call(&app, Method::POST, "/session/step?count=60", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(frames.as_array().unwrap().len(), 60);

    let (st, v) = call(&app, Method::POST, "/slices", Some(s5())).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    assert_eq!(v["slice"], "1-5");
    assert_eq!(v["placement"]["pool_cuup"], "edge");
    assert_eq!(v["placement"]["pool_upf"], "edge");
    assert_eq!(v["placement"]["prb_floor"], 40);

    let (_, v) = call(&app, Method::POST, "/session/step", None).await;
    let row = v[0]["slices"].as_array().unwrap().iter().find(|r| r["slice"] == "1-5").unwrap().clone();
    assert!((row["achieved_mbps"].as_f64().unwrap() - 29.31).abs() < 0.01);
}

#[tokio::test]
async fn rejections_map_to_status_codes() {
    let s = Session::spawn(&exp2_without_s5(), SessionConfig::default());
    let app = api::router(s);
    call(&app, Method::POST, "/session/step", None).await;

    let (st, v) = call(&app, Method::POST, "/slices", Some(json!({"sst": 1, "sd": 1, "delay_min_ms": 0.0, "delay_max_ms": 100.0, "tp_min_mbps": 10.0, "tp_max_mbps": 20.0}))).await;
    assert_eq!(st, StatusCode::CONFLICT, "{v}");
    assert_eq!(v["error"]["code"], "DuplicateSnssai");

    let (st, v) = call(&app, Method::POST, "/slices", Some(json!({"sst": 1, "sd": 9, "delay_min_ms": 0.0, "delay_max_ms": 100.0, "tp_min_mbps": 300.0, "tp_max_mbps": 300.0}))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["error"]["code"], "SlaUnsatisfiable");

    let (st, _) = call(&app, Method::POST, "/slices", Some(json!({"sst": 1}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, v) = call(&app, Method::POST, "/slices", Some(json!({"sst": 1, "sd": 9, "delay_min_ms": 50.0, "delay_max_ms": 10.0, "tp_min_mbps": 1.0, "tp_max_mbps": 2.0}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{v}");

    let (st, _) = call(&app, Method::DELETE, "/slices/7-7", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, Method::DELETE, "/slices/garbage", None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, v) = call(&app, Method::DELETE, "/slices/1-2", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["slice"], "1-2");
    let (_, v) = call(&app, Method::GET, "/slices", None).await;
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn whatif_is_pure() {
    let s = Session::spawn(&bundled::exp1(), SessionConfig::default());
    let app = api::router(s.clone());
    let s2 = json!({"sst": 1, "sd": 20, "delay_min_ms": 10.0, "delay_max_ms": 70.0, "tp_min_mbps": 70.0, "tp_max_mbps": 250.0});
    let (st, a) = call(&app, Method::POST, "/whatif/placement", Some(s2.clone())).await;
    assert_eq!(st, StatusCode::OK);
    let (_, b) = call(&app, Method::POST, "/whatif/placement", Some(s2)).await;
    assert_eq!(a, b);
    assert_eq!(a["placement"]["pool_cuup"], "regional");
    assert_eq!(a["placement"]["predicted_rtt_ms"], 60.0);

    let open = json!({"sst": 1, "sd": 21, "delay_min_ms": 0.0, "delay_max_ms": 1000.0, "tp_min_mbps": 10.0, "tp_max_mbps": 250.0});
    let (_, v) = call(&app, Method::POST, "/whatif/placement", Some(open)).await;
    assert_eq!(v["placement"]["pool_cuup"], "central");

    let tight = json!({"sst": 1, "sd": 22, "delay_min_ms": 0.0, "delay_max_ms": 1.0, "tp_min_mbps": 10.0, "tp_max_mbps": 250.0});
    let (st, v) = call(&app, Method::POST, "/whatif/placement", Some(tight)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["feasible"], false);
    assert_eq!(v["reason"]["code"], "NoFeasiblePlacement");

    let (_, ev) = call(&app, Method::GET, "/events", None).await;
    assert!(ev.as_array().unwrap().is_empty());
    assert!(s.reconcile_since(None).is_empty());
}

#[tokio::test]
async fn metrics_and_events_resume_after_since() {
    let s = Session::spawn(&bundled::exp1(), SessionConfig::default());
    let app = api::router(s);
    call(&app, Method::POST, "/session/step?count=5", None).await;
    let (_, all) = call(&app, Method::GET, "/metrics", None).await;
    assert_eq!(all.as_array().unwrap().len(), 5);
    let (_, tail) = call(&app, Method::GET, "/metrics?since=2", None).await;
    let seqs: Vec<u64> = tail.as_array().unwrap().iter().map(|f| f["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, [3, 4]);
    let (_, ev) = call(&app, Method::GET, "/events?since=0", None).await;
    assert!(ev.as_array().unwrap().iter().all(|r| r["seq"].as_u64().unwrap() > 0));
    let (_, topo) = call(&app, Method::GET, "/topology", None).await;
    assert_eq!(topo["pools"].as_array().unwrap().len(), 3);
    assert_eq!(topo["du_pool"], "edge");
    let (_, st) = call(&app, Method::GET, "/session", None).await;
    assert_eq!(st["now_ms"], 5000);
    assert_eq!(st["running"], false);
}

#[tokio::test]
async fn assurance_toggle_over_http() {
    let s = Session::spawn(&exp2_without_s5(), SessionConfig::default());
    let app = api::router(s);
    call(&app, Method::POST, "/slices", Some(s5())).await;
    let (_, v) = call(&app, Method::POST, "/session/assurance", Some(json!({"enabled": true}))).await;
    assert_eq!(v["enabled"], true);
    let (_, f) = call(&app, Method::POST, "/session/step", None).await;
    let row = f[0]["slices"].as_array().unwrap().iter().find(|r| r["slice"] == "1-5").unwrap().clone();
    assert!((row["achieved_mbps"].as_f64().unwrap() - 65.66).abs() < 0.01);
    let (_, v) = call(&app, Method::POST, "/session/assurance", Some(json!({"enabled": false}))).await;
    assert_eq!(v["enabled"], false);
    let (_, f) = call(&app, Method::POST, "/session/step", None).await;
    let row = f[0]["slices"].as_array().unwrap().iter().find(|r| r["slice"] == "1-5").unwrap().clone();
    assert!(row["tp_violation_pct"].as_f64().unwrap() > 60.0);
}
