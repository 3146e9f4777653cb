//! HTTP/JSON API over the store and in-flight runs, with server-sent
//! events and a long-poll fallback. Binds to loopback by default and has
//! no authentication.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/runs` | start a run, 201 with its id |
//! | GET | `/runs` | list runs |
//! | GET | `/runs/{id}` | phase, awaited evaluation, manifest, metrics |
//! | GET | `/runs/{id}/sessions/{k}` | JSONL transcript |
//! | GET | `/runs/{id}/programs/{hash}` | program text |
//! | GET | `/runs/{id}/program` | assembled program |
//! | POST | `/runs/{id}/evaluation` | 204 first legal, 409 duplicate, 422 illegal |
//! | GET | `/runs/{id}/events` | event stream |
//! | GET | `/runs/{id}/poll?after=N` | wait for the next event |
//! | POST | `/runs/{id}/cancel` | cancel an in-flight run |

mod agents;
mod live;

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use crate::agent::{token_for, AwaitingEvaluation, EvalSlot, Evaluation, SubmitError};
use crate::clock::{Clock, SystemClock};
use crate::dfd::{check_ordering, decode_json, decode_toml, validate_background, Background};
use crate::engine::{Engine, Observer, RunConfig, RunPhase, RunStatus};
use crate::hash::sha256_hex;
use crate::protocol::{classify_intelligibility, Intelligibility, Sender, Tag};
use crate::store::{metrics, resume, Checkpointer, Manifest, MetricSet, Store, StoreError, StoredConfig, Tee};

pub use agents::{AgentSpec, DeltaSink, HumanSpec, LlmSpec, AGENTS_FILE};
pub use live::{Broadcaster, EventKind, LiveRun, ServerEvent, EVENT_VERSION};

pub const API_VERSION: u32 = 1;
pub const DEFAULT_ADDR: &str = "127.0.0.1:8750";

#[derive(Clone, Debug)]
pub struct ServiceOptions {
    /// Accept scripted policies whose checker runs generated programs.
    pub allow_code: bool,
    /// How long an evaluation submitter waits for the engine to record it.
    pub commit_timeout: Duration,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            allow_code: false,
            commit_timeout: Duration::from_secs(30),
        }
    }
}

pub struct Service {
    store: Store,
    options: ServiceOptions,
    clock: Arc<dyn Clock>,
    runs: Mutex<HashMap<String, Arc<LiveRun>>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "v": API_VERSION, "error": message.into() }),
        }
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ApiError::new(StatusCode::NOT_FOUND, format!("run {id} not found")),
            StoreError::Exists(id) => ApiError::new(StatusCode::CONFLICT, format!("run {id} already exists")),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Body of `POST /runs`.
#[derive(Clone, Debug, Deserialize)]
pub struct CreateRun {
    /// The DFD document, as a JSON object or as JSON or TOML text.
    pub dfd: serde_json::Value,
    #[serde(default)]
    pub config: RunConfig,
    #[serde(default)]
    pub llm: LlmSpec,
    #[serde(default)]
    pub human: HumanSpec,
    #[serde(default)]
    pub run_id: Option<String>,
}

/// Body of `POST /runs/{id}/evaluation`.
#[derive(Clone, Debug, Deserialize)]
pub struct EvaluationBody {
    /// Defaults to the currently awaited token.
    #[serde(default)]
    pub token: Option<String>,
    pub tag: Tag,
    #[serde(default)]
    pub refutation: Option<String>,
    /// For REFUTE: the program is fine, only the explanation is wrong.
    #[serde(default)]
    pub explanation_only: bool,
}

impl EvaluationBody {
    fn into_evaluation(self) -> Result<Evaluation, ApiError> {
        let text = self.refutation.unwrap_or_default();
        Ok(match self.tag {
            Tag::Ratify => Evaluation::ratify(),
            Tag::Refute if self.explanation_only => Evaluation::refute_explanation(text),
            Tag::Refute => Evaluation::refute(text),
            Tag::Reject => Evaluation::reject(Some(text).filter(|t| !t.is_empty())),
            other => {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    format!("{other} is not a human evaluation"),
                ))
            }
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunView {
    pub v: u32,
    pub run_id: String,
    pub phase: RunPhase,
    #[serde(flatten)]
    pub status: RunStatus,
    pub live: bool,
    pub seq: u64,
    pub awaiting: Option<AwaitingEvaluation>,
    pub manifest: Manifest,
    pub metrics: MetricSet,
    pub intelligibility: Vec<Option<Intelligibility>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PollView {
    pub v: u32,
    pub seq: u64,
    pub phase: RunPhase,
    #[serde(flatten)]
    pub status: RunStatus,
    pub awaiting: Option<AwaitingEvaluation>,
}

fn valid_run_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, message)
}

fn parse_dfd_value(value: &serde_json::Value) -> Result<Background, ApiError> {
    let parsed = match value {
        serde_json::Value::String(text) => decode_json(text).or_else(|e| decode_toml(text).map_err(|_| e)),
        other => decode_json(&other.to_string()),
    };
    let background = parsed.map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        body: json!({ "v": API_VERSION, "error": "malformed DFD", "findings": [e.to_string()] }),
    })?;
    let report = validate_background(&background);
    if !report.is_valid() {
        let findings: Vec<String> = report.findings.iter().map(ToString::to_string).collect();
        return Err(ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "v": API_VERSION, "error": "invalid DFD", "findings": findings }),
        });
    }
    Ok(background)
}

impl Service {
    pub fn new(store: Store, options: ServiceOptions) -> Arc<Self> {
        Self::with_clock(store, options, Arc::new(SystemClock))
    }

    pub fn with_clock(store: Store, options: ServiceOptions, clock: Arc<dyn Clock>) -> Arc<Self> {
        Arc::new(Self {
            store,
            options,
            clock,
            runs: Mutex::new(HashMap::new()),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn live(&self, run_id: &str) -> Option<Arc<LiveRun>> {
        self.runs.lock().unwrap_or_else(|p| p.into_inner()).get(run_id).cloned()
    }

    fn insert_live(&self, live: Arc<LiveRun>) {
        self.runs
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(live.run_id.clone(), live);
    }

    fn new_live(&self, run_id: &str) -> (Arc<LiveRun>, Arc<EvalSlot>, DeltaSink) {
        let slot = EvalSlot::with_commit_timeout(self.options.commit_timeout);
        let live = LiveRun::new(run_id, slot.clone());
        let for_sink = live.clone();
        let sink: DeltaSink = Arc::new(move |d: &str| for_sink.publish(EventKind::Delta { text: d.to_string() }));
        (live, slot, sink)
    }

    /// Validate, create the run directory and start the engine thread.
    pub fn create_run(self: &Arc<Self>, request: CreateRun) -> ApiResult<String> {
        let background = parse_dfd_value(&request.dfd)?;
        let config = request.config;
        config.validate().map_err(|e| bad_request(e.to_string()))?;
        if let Some(o) = &config.ordering {
            check_ordering(&background.dfd, o).map_err(|e| bad_request(e.to_string()))?;
        }
        if request.human.runs_code() && !self.options.allow_code {
            return Err(bad_request(
                "this policy runs generated code; start the service with --i-understand-this-runs-code",
            ));
        }
        let run_id = match request.run_id {
            Some(id) if valid_run_id(&id) => id,
            Some(id) => return Err(bad_request(format!("invalid run id `{id}`"))),
            None => uuid::Uuid::new_v4().to_string(),
        };
        let agents = AgentSpec {
            llm: request.llm,
            human: request.human,
        };
        let (live, slot, sink) = self.new_live(&run_id);
        let llm = agents.llm.build(Some(sink)).map_err(|e| bad_request(e.to_string()))?;
        let human = agents.human.build(&slot, &run_id);
        if self.store.exists(&run_id) {
            return Err(StoreError::Exists(run_id).into());
        }
        // The manifest is the commit point, so the agents go down first: a
        // listed run can always be resumed.
        let spec = serde_json::to_vec_pretty(&agents).expect("agent spec serializes");
        self.store.write_file(&run_id, AGENTS_FILE, &spec)?;
        let stored = StoredConfig::new(config.clone(), &llm.info());
        let mut checkpointer = Checkpointer::create(&self.store, &run_id, &background, stored, self.clock.clone())?;
        self.insert_live(live.clone());

        let clock = self.clock.clone();
        let id = run_id.clone();
        thread::Builder::new()
            .name(format!("run-{run_id}"))
            .spawn(move || {
                let (mut llm, mut human) = (llm, human);
                let mut broadcaster = Broadcaster(live.clone());
                let mut tee = Tee(&mut checkpointer, &mut broadcaster);
                let result = Engine::new(&mut *llm, &mut *human)
                    .with_run_id(&id)
                    .with_clock(clock)
                    .with_observer(&mut tee)
                    .execute(&background, &config);
                finish(&live, result.map(|_| ()).map_err(|e| e.to_string()));
            })
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        Ok(run_id)
    }

    /// Resume every run whose manifest says it was still running. Returns
    /// the ids resumed.
    pub fn recover(self: &Arc<Self>) -> Result<Vec<String>, StoreError> {
        let mut resumed = Vec::new();
        for id in self.store.list()? {
            if self.live(&id).is_some() || self.store.read_manifest(&id)?.is_finished() {
                continue;
            }
            let agents: AgentSpec = match self.store.read_file(&id, AGENTS_FILE)? {
                Some(text) => match serde_json::from_str(&text) {
                    Ok(a) => a,
                    Err(e) => {
                        tracing::error!("run {id}: unreadable {AGENTS_FILE}: {e}");
                        continue;
                    }
                },
                None => {
                    tracing::warn!("run {id}: no {AGENTS_FILE}, cannot resume");
                    continue;
                }
            };
            let (live, slot, sink) = self.new_live(&id);
            let llm = match agents.llm.build(Some(sink)) {
                Ok(l) => l,
                Err(e) => {
                    tracing::error!("run {id}: cannot rebuild the model: {e}");
                    continue;
                }
            };
            let human = agents.human.build(&slot, &id);
            self.insert_live(live.clone());
            let store = self.store.clone();
            let clock = self.clock.clone();
            let run_id = id.clone();
            thread::Builder::new()
                .name(format!("run-{id}"))
                .spawn(move || {
                    let mut broadcaster = Broadcaster(live.clone());
                    let result = resume(
                        &store,
                        &run_id,
                        llm,
                        human,
                        Some(&mut broadcaster as &mut dyn Observer),
                        clock,
                    );
                    finish(&live, result.map(|_| ()).map_err(|e| e.to_string()));
                })
                .map_err(|e| StoreError::Io {
                    path: self.store.run_dir(&id),
                    source: e,
                })?;
            tracing::info!("resumed run {id}");
            resumed.push(id);
        }
        Ok(resumed)
    }

    pub fn router(self: Arc<Self>) -> Router {
        Router::new()
            .route(
                "/health",
                get(|| async { Json(json!({ "v": API_VERSION, "ok": true })) }),
            )
            .route("/runs", get(list_runs).post(create_run))
            .route("/runs/{id}", get(get_run))
            .route("/runs/{id}/sessions/{k}", get(get_session))
            .route("/runs/{id}/programs/{hash}", get(get_program))
            .route("/runs/{id}/program", get(get_assembled))
            .route("/runs/{id}/evaluation", post(post_evaluation))
            .route("/runs/{id}/events", get(events))
            .route("/runs/{id}/poll", get(poll))
            .route("/runs/{id}/cancel", post(cancel))
            .with_state(self)
    }

    fn view(&self, id: &str) -> ApiResult<RunView> {
        let record = self.store.load(id)?;
        let live = self.live(id);
        let (phase, status) = match &live {
            Some(l) => l.view(),
            None => (record.manifest.phase.clone(), record.manifest.status.clone()),
        };
        Ok(RunView {
            v: API_VERSION,
            run_id: id.into(),
            phase,
            status,
            live: live.as_ref().is_some_and(|l| l.is_running()),
            seq: live.as_ref().map_or(0, |l| l.seq()),
            awaiting: live.as_ref().and_then(|l| l.slot.awaiting()),
            metrics: metrics(&record),
            intelligibility: record
                .sessions
                .iter()
                .map(|s| classify_intelligibility(s).ok())
                .collect(),
            manifest: record.manifest,
        })
    }

    /// Whether the evaluation named by `token` is already in the stored transcript.
    fn recorded(&self, id: &str, token: &str) -> bool {
        let Some(rest) = token.strip_prefix(id).and_then(|r| r.strip_prefix('.')) else {
            return false;
        };
        let mut parts = rest.rsplitn(3, '.');
        let (Some(exchange), Some(attempt), Some(process)) = (parts.next(), parts.next(), parts.next()) else {
            return false;
        };
        let (Ok(exchange), Ok(attempt)) = (exchange.parse::<u32>(), attempt.parse::<u32>()) else {
            return false;
        };
        let Ok(record) = self.store.load(id) else {
            return false;
        };
        record.sessions.iter().any(|s| {
            s.process_id.as_str() == process
                && s.messages.iter().any(|m| {
                    m.sender == Sender::Human
                        && m.tag != Tag::Init
                        && !m.synthetic
                        && m.attempt == attempt
                        && m.exchange() == exchange
                })
        })
    }
}

fn finish(live: &LiveRun, result: Result<(), String>) {
    if let Err(e) = &result {
        tracing::warn!("run {} stopped: {e}", live.run_id);
    }
    if live.is_running() {
        let reason = result.err().unwrap_or_else(|| "engine stopped".into());
        live.set_status(RunPhase::Aborted { reason: reason.clone() }, RunStatus::Aborted(reason));
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

async fn list_runs(State(svc): State<Arc<Service>>) -> ApiResult<Json<serde_json::Value>> {
    let runs = blocking(move || -> ApiResult<Vec<serde_json::Value>> {
        let mut out = Vec::new();
        for id in svc.store.list()? {
            let m = svc.store.read_manifest(&id)?;
            let live = svc.live(&id).is_some_and(|l| l.is_running());
            out.push(json!({
                "run_id": id,
                "mode": m.config.run.mode.name(),
                "status": m.status,
                "phase": m.phase,
                "live": live,
                "created_at": m.created_at,
            }));
        }
        Ok(out)
    })
    .await??;
    Ok(Json(json!({ "v": API_VERSION, "runs": runs })))
}

async fn create_run(State(svc): State<Arc<Service>>, body: Bytes) -> ApiResult<Response> {
    let request: CreateRun =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("malformed request: {e}")))?;
    let id = blocking(move || svc.create_run(request)).await??;
    Ok((StatusCode::CREATED, Json(json!({ "v": API_VERSION, "run_id": id }))).into_response())
}

async fn get_run(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Json<RunView>> {
    Ok(Json(blocking(move || svc.view(&id)).await??))
}

async fn get_session(State(svc): State<Arc<Service>>, Path((id, k)): Path<(String, usize)>) -> ApiResult<Response> {
    let manifest = svc.store.read_manifest(&id)?;
    if k >= manifest.sessions.len() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("run {id} has no session {k}"),
        ));
    }
    let text = svc.store.read_session_text(&id, k)?.unwrap_or_default();
    Ok((
        [
            (header::CONTENT_TYPE, "application/x-ndjson".to_string()),
            (
                header::HeaderName::from_static("x-transcript-sha256"),
                sha256_hex(&text),
            ),
        ],
        text,
    )
        .into_response())
}

async fn get_program(State(svc): State<Arc<Service>>, Path((id, hash)): Path<(String, String)>) -> ApiResult<Response> {
    svc.store.read_manifest(&id)?;
    if hash.len() != 64 || !hash.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(bad_request("not a program hash"));
    }
    match svc.store.read_file(&id, &format!("programs/{hash}"))? {
        Some(text) => Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response()),
        None => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("program {hash} not found"),
        )),
    }
}

async fn get_assembled(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let manifest = svc.store.read_manifest(&id)?;
    match manifest.assembled.as_deref() {
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "run has not finished")),
        Some("empty") => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "run failed; no program was assembled",
        )),
        Some(hash) => get_program(State(svc), Path((id, hash.to_string()))).await,
    }
}

async fn post_evaluation(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<StatusCode> {
    let body: EvaluationBody =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("malformed evaluation: {e}")))?;
    let Some(live) = svc.live(&id) else {
        svc.store.read_manifest(&id)?;
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("run {id} is not in flight"),
        ));
    };
    let token = match body.token.clone().or_else(|| live.slot.awaiting().map(|a| a.token)) {
        Some(t) => t,
        None => return Err(ApiError::new(StatusCode::CONFLICT, "no evaluation is awaited")),
    };
    let eval = body.into_evaluation()?;
    let result = blocking(move || {
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            match live.slot.submit(&token, eval.clone()) {
                Err(SubmitError::UnknownToken(t)) => {
                    if svc.recorded(&id, &t) {
                        return Err(SubmitError::AlreadyDecided);
                    }
                    // The engine may have announced the exchange before opening the slot.
                    let announced = match live.view().0 {
                        RunPhase::AwaitingHuman {
                            process,
                            attempt,
                            exchange,
                            ..
                        } => token_for(&id, &process, attempt, exchange) == t,
                        _ => false,
                    };
                    if !announced || Instant::now() >= deadline {
                        return Err(SubmitError::UnknownToken(t));
                    }
                    thread::sleep(Duration::from_millis(10));
                }
                other => return other,
            }
        }
    })
    .await?;
    match result {
        Ok(()) => Ok(StatusCode::NO_CONTENT),
        Err(SubmitError::AlreadyDecided) => Err(ApiError::new(StatusCode::CONFLICT, "already decided")),
        Err(SubmitError::Illegal(e)) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())),
        Err(e @ (SubmitError::UnknownToken(_) | SubmitError::Cancelled)) => {
            Err(ApiError::new(StatusCode::CONFLICT, e.to_string()))
        }
        Err(e @ SubmitError::NotRecorded) => Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, e.to_string())),
    }
}

async fn cancel(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let Some(live) = svc.live(&id).filter(|l| l.is_running()) else {
        svc.store.read_manifest(&id)?;
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("run {id} is not in flight"),
        ));
    };
    live.slot.cancel("cancelled by operator");
    Ok((StatusCode::ACCEPTED, Json(json!({ "v": API_VERSION, "run_id": id }))).into_response())
}

fn sse(event: &ServerEvent) -> SseEvent {
    SseEvent::default()
        .event(event.kind.name())
        .id(event.seq.to_string())
        .json_data(event)
        .expect("event serializes")
}

async fn events(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>> {
    let manifest = svc.store.read_manifest(&id)?;
    let live = svc.live(&id);
    let rx = live.as_ref().map(|l| l.subscribe());
    let (phase, status, seq) = match &live {
        Some(l) => {
            let (p, s) = l.view();
            (p, s, l.seq())
        }
        None => (manifest.phase, manifest.status, 0),
    };
    let first = ServerEvent {
        v: EVENT_VERSION,
        seq,
        kind: EventKind::Phase {
            phase,
            status: status.clone(),
        },
    };
    let open = status == RunStatus::Running && rx.is_some();
    let stream = futures::stream::unfold((Some(first), rx, open), |(first, mut rx, open)| async move {
        if let Some(e) = first {
            return Some((Ok(sse(&e)), (None, rx, open)));
        }
        if !open {
            return None;
        }
        let r = rx.as_mut()?;
        loop {
            match r.recv().await {
                Ok(e) => {
                    let ended = matches!(&e.kind, EventKind::Phase { status, .. } if *status != RunStatus::Running);
                    return Some((Ok(sse(&e)), (None, rx, !ended)));
                }
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

#[derive(Deserialize)]
struct PollQuery {
    #[serde(default)]
    after: u64,
    #[serde(default = "default_poll_ms")]
    timeout_ms: u64,
}

fn default_poll_ms() -> u64 {
    25_000
}

async fn poll(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(q): Query<PollQuery>,
) -> ApiResult<Json<PollView>> {
    let manifest = svc.store.read_manifest(&id)?;
    let Some(live) = svc.live(&id) else {
        return Ok(Json(PollView {
            v: API_VERSION,
            seq: 0,
            phase: manifest.phase,
            status: manifest.status,
            awaiting: None,
        }));
    };
    let mut rx = live.watch_seq();
    let wait = Duration::from_millis(q.timeout_ms.min(60_000));
    let _ = tokio::time::timeout(wait, rx.wait_for(|s| *s > q.after)).await;
    let (phase, status) = live.view();
    Ok(Json(PollView {
        v: API_VERSION,
        seq: live.seq(),
        phase,
        status,
        awaiting: live.slot.awaiting(),
    }))
}

/// Serve until ctrl-c.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    serve_on(service, tokio::net::TcpListener::bind(addr).await?).await
}

pub async fn serve_on(service: Arc<Service>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, service.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests;
