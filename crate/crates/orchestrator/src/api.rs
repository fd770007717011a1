//! HTTP JSON API over a [`Session`].

use std::convert::Infallible;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use slicing_core::model::{CellConfig, DcPool, Link, PoolId, SliceId, SliceIntent};
use slicing_core::sim::{Outcome, RejectReason};
use tokio_stream::wrappers::BroadcastStream;

use crate::session::{Push, Session};

pub fn router(session: Session) -> Router {
    Router::new()
        .route("/slices", post(submit).get(list_slices))
        .route("/slices/{id}", delete(retire))
        .route("/topology", get(topology))
        .route("/metrics", get(metrics))
        .route("/events", get(events))
        .route("/reconcile", get(reconcile))
        .route("/whatif/placement", post(whatif))
        .route("/session", get(status))
        .route("/session/start", post(start))
        .route("/session/pause", post(pause))
        .route("/session/step", post(step))
        .route("/session/assurance", post(assurance))
        .route("/stream", get(stream_frames))
        .with_state(session)
}

pub struct ApiError(StatusCode, serde_json::Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

fn bad_request(message: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, json!({ "error": { "code": "Malformed", "detail": message.to_string() } }))
}

fn closed() -> ApiError {
    ApiError(StatusCode::SERVICE_UNAVAILABLE, json!({ "error": "session closed" }))
}

fn rejection(slice: SliceId, reason: RejectReason) -> ApiError {
    let status = match reason {
        RejectReason::DuplicateSnssai => StatusCode::CONFLICT,
        RejectReason::Malformed(_) => StatusCode::BAD_REQUEST,
        RejectReason::UnknownSlice => StatusCode::NOT_FOUND,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    ApiError(
        status,
        json!({ "slice": slice, "message": reason.to_string(), "error": reason }),
    )
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| bad_request(e.body_text()))
}

async fn submit(State(s): State<Session>, payload: Result<Json<SliceIntent>, JsonRejection>) -> Result<Response, ApiError> {
    let intent = body(payload)?;
    match s.submit(intent).await.map_err(|_| closed())? {
        Outcome::Admitted(placement) => Ok((
            StatusCode::CREATED,
            Json(json!({ "slice": placement.slice, "placement": placement })),
        )
            .into_response()),
        Outcome::Rejected { slice, reason } => Err(rejection(slice, reason)),
        other => unreachable!("slice start answered {other:?}"),
    }
}

async fn list_slices(State(s): State<Session>) -> impl IntoResponse {
    Json(s.slices())
}

async fn retire(State(s): State<Session>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slice: SliceId = id.parse().map_err(bad_request)?;
    match s.retire(slice).await.map_err(|_| closed())? {
        Outcome::Stopped(slice) => Ok(Json(json!({ "slice": slice })).into_response()),
        Outcome::Rejected { slice, reason } => Err(rejection(slice, reason)),
        other => unreachable!("slice stop answered {other:?}"),
    }
}

#[derive(Serialize)]
struct TopologyView {
    pools: Vec<DcPool>,
    links: Vec<Link>,
    du_pool: PoolId,
    radio_delay_ms: f64,
    core_delay_ms: f64,
    cell: CellConfig,
}

async fn topology(State(s): State<Session>) -> impl IntoResponse {
    let e = s.engine();
    let t = e.topology();
    Json(TopologyView {
        pools: t.pools().to_vec(),
        links: t.links(),
        du_pool: t.du_pool().clone(),
        radio_delay_ms: t.radio_delay_ms,
        core_delay_ms: t.core_delay_ms,
        cell: e.cell().clone(),
    })
}

#[derive(Deserialize)]
struct Since {
    since: Option<u64>,
}

async fn metrics(State(s): State<Session>, Query(q): Query<Since>) -> impl IntoResponse {
    Json(s.frames_since(q.since))
}

async fn events(State(s): State<Session>, Query(q): Query<Since>) -> impl IntoResponse {
    Json(s.records_since(q.since))
}

async fn reconcile(State(s): State<Session>, Query(q): Query<Since>) -> impl IntoResponse {
    Json(s.reconcile_since(q.since))
}

async fn whatif(State(s): State<Session>, payload: Result<Json<SliceIntent>, JsonRejection>) -> Result<Response, ApiError> {
    let intent = body(payload)?;
    Ok(Json(s.whatif(&intent)).into_response())
}

async fn status(State(s): State<Session>) -> impl IntoResponse {
    Json(s.status())
}

async fn start(State(s): State<Session>) -> Result<Response, ApiError> {
    s.set_running(true).await.map_err(|_| closed())?;
    Ok(Json(json!({ "running": true })).into_response())
}

async fn pause(State(s): State<Session>) -> Result<Response, ApiError> {
    s.set_running(false).await.map_err(|_| closed())?;
    Ok(Json(json!({ "running": false })).into_response())
}

#[derive(Deserialize)]
struct StepQuery {
    count: Option<u32>,
}

async fn step(State(s): State<Session>, Query(q): Query<StepQuery>) -> Result<Response, ApiError> {
    let frames = s.step(q.count.unwrap_or(1).min(100_000)).await.map_err(|_| closed())?;
    Ok(Json(frames).into_response())
}

#[derive(Deserialize)]
struct AssuranceBody {
    enabled: bool,
}

async fn assurance(State(s): State<Session>, payload: Result<Json<AssuranceBody>, JsonRejection>) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let enabled = s.set_assurance(req.enabled).await.map_err(|_| closed())?;
    Ok(Json(json!({ "requested": req.enabled, "enabled": enabled })).into_response())
}

#[derive(Deserialize)]
struct StreamQuery {
    frames_since: Option<u64>,
    events_since: Option<u64>,
}

fn to_event(p: &Push) -> Event {
    let (kind, id) = match p {
        Push::Frame(f) => ("frame", f.seq),
        Push::Record(r) => ("record", r.seq),
    };
    let data = match p {
        Push::Frame(f) => serde_json::to_string(f),
        Push::Record(r) => serde_json::to_string(r),
    }
    .expect("pushes serialize");
    Event::default().event(kind).id(id.to_string()).data(data)
}

/// Server-sent events: `frame` and `record`, each tagged with its sequence
/// number. A reader that falls behind the broadcast buffer gets a `lagged`
/// event and should reconnect with its last sequence numbers.
async fn stream_frames(
    State(s): State<Session>,
    Query(q): Query<StreamQuery>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let (backlog, rx) = s.subscribe(q.frames_since, q.events_since);
    let mut last_frame = q.frames_since;
    let mut last_record = q.events_since;
    for p in &backlog {
        match p {
            Push::Frame(f) => last_frame = Some(f.seq),
            Push::Record(r) => last_record = Some(r.seq),
        }
    }
    let live = BroadcastStream::new(rx).filter_map(move |item| {
        let out = match item {
            Ok(p) => {
                let fresh = match &p {
                    Push::Frame(f) => last_frame.is_none_or(|n| f.seq > n),
                    Push::Record(r) => last_record.is_none_or(|n| r.seq > n),
                };
                fresh.then(|| Ok(to_event(&p)))
            }
            Err(_) => Some(Ok(Event::default().event("lagged").data("{}"))),
        };
        futures::future::ready(out)
    });
    let head = stream::iter(backlog.into_iter().map(|p| Ok(to_event(&p))));
    Sse::new(head.chain(live)).keep_alive(KeepAlive::default())
}
