use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use stagecraft_core::generation::{run_pipeline, story_to_script, PremiseParagraph};
use stagecraft_core::llm::{InputClass, LlmGateway, Strategy};
use stagecraft_core::runtime::{
    read_events, replay, ArchitectureKind, MemoryEntry, ReflectionRecord, SceneHeader, Session,
    SessionLog, SessionStatus, TurnResult,
};
use stagecraft_core::script::{parse_script, PlotChain};
use tokio::sync::broadcast;

use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::store::{GenerationJob, JobState, SessionHandle, Store};

struct LiveSession {
    handle: SessionHandle,
    session: Session,
    log: SessionLog,
    last: Option<(String, TurnResponse)>,
}

type SharedSession = Arc<tokio::sync::Mutex<LiveSession>>;

pub struct AppState {
    config: ServiceConfig,
    gateway: LlmGateway,
    store: Store,
    sessions: Mutex<HashMap<String, SharedSession>>,
    streams: Mutex<HashMap<String, broadcast::Sender<TurnResponse>>>,
    jobs: Mutex<HashMap<String, GenerationJob>>,
}

impl AppState {
    pub fn new(config: ServiceConfig, gateway: LlmGateway) -> std::io::Result<Arc<Self>> {
        let store = Store::open(&config.data_dir)?;
        Ok(Arc::new(Self {
            config,
            gateway,
            store,
            sessions: Mutex::new(HashMap::new()),
            streams: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
        }))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// The live session, loading it from its event log if needed.
    fn live(&self, id: &str) -> Result<SharedSession, ApiError> {
        let mut sessions = self.sessions.lock().expect("session map poisoned");
        if let Some(live) = sessions.get(id) {
            return Ok(live.clone());
        }
        let handle = self.store.session_meta(id).ok_or_else(|| ApiError::UnknownSession(id.into()))?;
        let path = self.store.session_log_path(id);
        let events = read_events(&path).map_err(|e| ApiError::Internal(e.to_string()))?;
        let session = replay(&events).map_err(|e| ApiError::Internal(e.to_string()))?;
        tracing::info!("resumed session {id} at turn {}", session.turn);
        let live = Arc::new(tokio::sync::Mutex::new(LiveSession {
            handle,
            session,
            log: SessionLog::open(&path)?,
            last: None,
        }));
        sessions.insert(id.to_string(), live.clone());
        Ok(live)
    }

    fn stream(&self, id: &str) -> broadcast::Sender<TurnResponse> {
        self.streams
            .lock()
            .expect("stream map poisoned")
            .entry(id.to_string())
            .or_insert_with(|| broadcast::channel(64).0)
            .clone()
    }

    fn set_job(&self, job: GenerationJob) {
        let mut jobs = self.jobs.lock().expect("job map poisoned");
        if jobs.get(&job.id).is_some_and(|j| j.state.is_terminal()) {
            return;
        }
        if let Err(e) = self.store.put_job(&job) {
            tracing::error!("persisting job {}: {e}", job.id);
        }
        jobs.insert(job.id.clone(), job);
    }

    fn job(&self, id: &str) -> Option<GenerationJob> {
        let jobs = self.jobs.lock().expect("job map poisoned");
        jobs.get(id).cloned().or_else(|| self.store.job(id))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/scripts", post(upload_script).get(list_scripts))
        .route("/scripts/{id}", get(get_script))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/message", post(post_message))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .route("/sessions/{id}/plots", get(get_plots))
        .route("/sessions/{id}/stream", get(stream_session))
        .route("/generate", post(submit_generation))
        .route("/generate/{id}", get(get_job))
        .route("/reports/{id}", get(get_report))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .merge(api)
        .with_state(state)
}

async fn require_token(State(state): State<Arc<AppState>>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.config.bearer_token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::Unauthorized.into_response();
        }
    }
    next.run(request).await
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn new_id(prefix: &str) -> String {
    format!("{prefix}-{}", uuid::Uuid::new_v4().simple())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))
}

#[derive(Serialize, Deserialize)]
pub struct ScriptCreated {
    pub id: String,
    pub title: String,
    pub scenes: usize,
}

async fn upload_script(State(state): State<Arc<AppState>>, body: String) -> Result<(StatusCode, Json<ScriptCreated>), ApiError> {
    let script = parse_script(&body).map_err(|e| ApiError::Validation(e.to_string()))?;
    let id = new_id("script");
    state.store.put_script(&id, &script)?;
    Ok((
        StatusCode::CREATED,
        Json(ScriptCreated {
            id,
            title: script.title.clone(),
            scenes: script.scenes.len(),
        }),
    ))
}

async fn list_scripts(State(state): State<Arc<AppState>>) -> Result<Json<Vec<String>>, ApiError> {
    Ok(Json(state.store.script_ids()?))
}

async fn get_script(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let script = state.store.script(&id)?;
    Ok(Json(script).into_response())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub script_id: String,
    #[serde(default)]
    pub architecture: Option<String>,
    /// Reflection interval; 0 disables reflection.
    #[serde(default)]
    pub k: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub handle: SessionHandle,
    pub title: String,
    pub player: String,
    pub status: SessionStatus,
    pub turn: u64,
    pub scene: SceneHeader,
}

impl SessionView {
    fn of(live: &LiveSession) -> Self {
        Self {
            handle: live.handle.clone(),
            title: live.session.script.title.clone(),
            player: live.session.player_name(),
            status: live.session.status,
            turn: live.session.turn,
            scene: live.session.scene_header(),
        }
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(body): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let kind = body
        .architecture
        .as_deref()
        .map(str::parse::<ArchitectureKind>)
        .transpose()
        .map_err(|e| ApiError::Validation(e.to_string()))?;
    let script = state.store.script(&body.script_id)?;
    let config = state.config.runtime.architecture_config(kind, body.k);
    let session = Session::new(script, config).map_err(|e| ApiError::Validation(e.to_string()))?;
    let handle = SessionHandle {
        id: new_id("session"),
        script_id: body.script_id,
        created_at: now(),
        architecture: config,
    };
    let log = SessionLog::create(&state.store.session_log_path(&handle.id), &session.script, &config)?;
    state.store.put_session_meta(&handle)?;
    let live = LiveSession {
        handle: handle.clone(),
        session,
        log,
        last: None,
    };
    let view = SessionView::of(&live);
    state
        .sessions
        .lock()
        .expect("session map poisoned")
        .insert(handle.id.clone(), Arc::new(tokio::sync::Mutex::new(live)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let live = state.live(&id)?;
    let guard = live.lock().await;
    Ok(Json(SessionView::of(&guard)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlayerMessage {
    pub text: String,
    /// Resending the token of the last committed turn returns that turn again.
    #[serde(default)]
    pub client_token: Option<String>,
}

/// The player-facing result of one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub session_id: String,
    pub turn: u64,
    pub scene_index: u32,
    pub speaker: String,
    pub addressee: String,
    pub utterance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub input_class: InputClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    pub completed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_header: Option<SceneHeader>,
    pub status: SessionStatus,
    pub finished: bool,
}

impl TurnResponse {
    fn of(session_id: &str, result: TurnResult) -> Self {
        let d = result.decision;
        Self {
            session_id: session_id.to_string(),
            turn: result.turn,
            scene_index: result.scene_index,
            speaker: d.speaker,
            addressee: d.addressee,
            utterance: d.utterance,
            action: d.action,
            input_class: d.input_class,
            strategy: d.strategy,
            completed: result.completed,
            scene_header: result.scene_header,
            status: result.status,
            finished: result.status == SessionStatus::Finished,
        }
    }
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<PlayerMessage>,
) -> Result<Json<TurnResponse>, ApiError> {
    let live = state.live(&id)?;
    let mut guard = live.lock().await;
    if let (Some(token), Some((last, response))) = (&body.client_token, &guard.last) {
        if token == last {
            return Ok(Json(response.clone()));
        }
    }
    if guard.session.is_finished() {
        return Err(ApiError::SessionFinished);
    }
    let snapshot = guard.session.clone();
    let gateway = state.gateway.clone();
    let text = body.text.clone();
    let record = blocking(move || snapshot.plan_turn(&text, &gateway)).await??;
    guard.log.append_turn(&record)?;
    let result = guard.session.apply_record(&record);
    let response = TurnResponse::of(&id, result);
    if let Some(token) = body.client_token {
        guard.last = Some((token, response.clone()));
    }
    let _ = state.stream(&id).send(response.clone());
    Ok(Json(response))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptView {
    pub session: SessionView,
    /// Headers of every scene reached so far, in order.
    pub scenes: Vec<SceneHeader>,
    pub entries: Vec<MemoryEntry>,
}

async fn get_transcript(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<TranscriptView>, ApiError> {
    let live = state.live(&id)?;
    let guard = live.lock().await;
    let s = &guard.session;
    Ok(Json(TranscriptView {
        session: SessionView::of(&guard),
        scenes: s.script.scenes[..=s.scene_cursor.min(s.script.scenes.len() - 1)]
            .iter()
            .map(SceneHeader::of)
            .collect(),
        entries: s.memory.clone(),
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotView {
    pub scene_index: u32,
    pub chain: PlotChain,
    pub reflections: Vec<ReflectionRecord>,
}

async fn get_plots(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<PlotView>, ApiError> {
    let live = state.live(&id)?;
    let guard = live.lock().await;
    Ok(Json(PlotView {
        scene_index: guard.session.scene().index,
        chain: guard.session.chain.clone(),
        reflections: guard.session.reflections.clone(),
    }))
}

async fn stream_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    state.live(&id)?;
    let rx = state.stream(&id).subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(turn) => {
                    let event = Event::default().event("turn").json_data(&turn).unwrap_or_default();
                    return Some((Ok(event), rx));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub premise: String,
    #[serde(default)]
    pub seed: u64,
}

async fn submit_generation(
    State(state): State<Arc<AppState>>,
    Json(body): Json<GenerateRequest>,
) -> Result<(StatusCode, Json<GenerationJob>), ApiError> {
    let premise = PremiseParagraph::new(body.premise.clone()).map_err(|e| ApiError::Validation(e.to_string()))?;
    let job = GenerationJob {
        id: new_id("job"),
        premise: body.premise,
        seed: body.seed,
        state: JobState::Queued,
        script_id: None,
        report_id: None,
        warnings: premise.warning().into_iter().collect(),
        error: None,
    };
    state.set_job(job.clone());
    let worker = state.clone();
    let queued = job.clone();
    tokio::task::spawn_blocking(move || run_job(&worker, queued, premise));
    Ok((StatusCode::ACCEPTED, Json(job)))
}

fn run_job(state: &AppState, mut job: GenerationJob, premise: PremiseParagraph) {
    job.state = JobState::Running;
    state.set_job(job.clone());
    let report_id = job.id.clone();
    match run_pipeline(&premise, job.seed, &state.gateway, &state.config.generation) {
        Err(failure) => {
            let _ = state.store.put_failure(&report_id, &failure);
            job.report_id = Some(report_id);
            job.error = Some(failure.error.to_string());
            job.state = JobState::Failed;
        }
        Ok(output) => {
            let _ = state.store.put_report(&report_id, &output.report);
            job.report_id = Some(report_id);
            job.warnings.extend(output.report.warnings.iter().cloned());
            match story_to_script(&output.story, &state.gateway) {
                Ok(outcome) => {
                    let script_id = format!("{}-script", job.id);
                    match state.store.put_script(&script_id, &outcome.script) {
                        Ok(()) => {
                            job.script_id = Some(script_id);
                            job.warnings.extend(outcome.warnings);
                            job.state = JobState::Done;
                        }
                        Err(e) => {
                            job.error = Some(e.to_string());
                            job.state = JobState::Failed;
                        }
                    }
                }
                Err(e) => {
                    job.error = Some(e.to_string());
                    job.state = JobState::Failed;
                }
            }
        }
    }
    state.set_job(job);
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<GenerationJob>, ApiError> {
    state.job(&id).map(Json).ok_or(ApiError::UnknownJob(id))
}

async fn get_report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    state.store.report(&id).map(Json).ok_or(ApiError::UnknownJob(id))
}
