//! HTTP service over a model directory.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `GET /models` | | model summaries |
//! | `POST /models/{id}/sample` | `length`, `steps?`, `seed?`, `burn_in?`, `constraints?` | corpus document |
//! | `POST /models/{id}/reharmonize` | `melody`, `voice?`, `keytrack?`, `constraints?`, `seed?`, `steps?` | `{piece, keytrack}` |
//! | `POST /jobs/train` | `corpus`, `config`, `mode?` | job record (202) |
//! | `GET /jobs/{id}` | | job record |

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use polymax::corpus::Mode;
use polymax::harmonizer::{reharmonize, HarmonizationRequest, KeyTrack, ModelSet};
use polymax::model::Model;
use polymax::sampler::{default_step_budget, run, ConstraintSet, SamplerConfig};
use polymax::trainer::TrainConfigFile;
use polymax::{Error, Symbol};
use serde::Deserialize;

use crate::commands::{harmonization_document, model_mode, piece_document, prepare_corpus, read_training_corpus, train_model};
use crate::jobs::{JobBoard, JobKind};
use crate::store::ModelStore;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub model_dir: PathBuf,
    /// Upper bound on MH steps per sampling request.
    pub max_steps: u64,
    pub max_length: usize,
    /// Queued plus running training jobs.
    pub queue_capacity: usize,
    /// Training jobs allowed to run at once.
    pub train_workers: usize,
}

impl ServerConfig {
    pub fn new(model_dir: PathBuf) -> Self {
        Self { model_dir, max_steps: 20_000_000, max_length: 10_000, queue_capacity: 4, train_workers: 1 }
    }
}

pub struct AppState {
    pub config: ServerConfig,
    pub store: ModelStore,
    pub jobs: JobBoard,
}

pub type SharedState = Arc<AppState>;

pub fn state(config: ServerConfig) -> polymax::Result<SharedState> {
    let store = ModelStore::open(&config.model_dir)?;
    let jobs = JobBoard::new(config.queue_capacity, config.train_workers);
    Ok(Arc::new(AppState { config, store, jobs }))
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/models", get(list_models))
        .route("/models/{id}/sample", post(sample))
        .route("/models/{id}/reharmonize", post(reharmonize_route))
        .route("/jobs/train", post(submit_train))
        .route("/jobs/{id}", get(get_job))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: SharedState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Error reply: status plus `{"error": kind, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Constraint(_) | Error::Alphabet(_) | Error::FullyPinned | Error::MissingModel(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Error::EmptyDataset(_) | Error::Divergence(_) | Error::EmptyReference | Error::TooLarge(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.kind(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.kind, "message": self.message }).to_string();
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

fn json_reply(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn model_or_404(state: &AppState, id: &str) -> Result<Arc<Model>, ApiError> {
    state.store.get(id).ok_or_else(|| ApiError::not_found(format!("unknown model {id:?}")))
}

fn parse_constraints(value: Option<&serde_json::Value>) -> Result<ConstraintSet, ApiError> {
    match value {
        None | Some(serde_json::Value::Null) => Ok(ConstraintSet::new()),
        Some(v) => Ok(ConstraintSet::parse(&v.to_string())?),
    }
}

/// Resolves the step count against the server's budget.
fn step_budget(state: &AppState, model: &Model, len: usize, steps: Option<u64>) -> Result<u64, ApiError> {
    let cap = state.config.max_steps;
    match steps {
        Some(0) => Err(ApiError::bad_request("steps must be at least 1")),
        Some(s) if s > cap => Err(ApiError::bad_request(format!("steps {s} exceed the server budget of {cap}"))),
        Some(s) => Ok(s),
        None => Ok(default_step_budget(model, len).clamp(1, cap)),
    }
}

fn check_length(state: &AppState, len: usize) -> Result<(), ApiError> {
    if len == 0 || len > state.config.max_length {
        return Err(ApiError::bad_request(format!("length must be between 1 and {}", state.config.max_length)));
    }
    Ok(())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", e.to_string()))?
}

async fn list_models(State(state): State<SharedState>) -> Result<Response, ApiError> {
    let list = state.store.list()?;
    Ok(json_reply(StatusCode::OK, serde_json::to_string(&list).expect("summaries serialize")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleBody {
    length: usize,
    #[serde(default)]
    steps: Option<u64>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    burn_in: Option<u64>,
    #[serde(default)]
    constraints: Option<serde_json::Value>,
}

async fn sample(State(state): State<SharedState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: SampleBody = parse_body(&body)?;
    let model = model_or_404(&state, &id)?;
    check_length(&state, req.length)?;
    let constraints = parse_constraints(req.constraints.as_ref())?;
    let steps = step_budget(&state, &model, req.length, req.steps)?;
    let doc = blocking(move || {
        let cfg = SamplerConfig { total_steps: Some(steps), burn_in: req.burn_in, seed: req.seed, ..Default::default() };
        let result = run(&model, req.length, &constraints, &cfg)?;
        Ok(piece_document(format!("{id}-sample-{}", req.seed), model_mode(&model), 0, None, result.sequence))
    })
    .await?;
    Ok(json_reply(StatusCode::OK, doc))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReharmonizeBody {
    melody: Vec<Symbol>,
    #[serde(default)]
    voice: usize,
    #[serde(default)]
    keytrack: Option<serde_json::Value>,
    #[serde(default)]
    constraints: Option<serde_json::Value>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    steps: Option<u64>,
}

async fn reharmonize_route(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: ReharmonizeBody = parse_body(&body)?;
    let model = model_or_404(&state, &id)?;
    let len = req.melody.len();
    check_length(&state, len)?;
    if req.voice >= model.topology.voices() {
        return Err(ApiError::bad_request(format!("voice {} outside the model's {} voices", req.voice, model.topology.voices())));
    }
    let constraints = parse_constraints(req.constraints.as_ref())?;
    let keys = match &req.keytrack {
        None | Some(serde_json::Value::Null) => None,
        Some(v) => Some(KeyTrack::parse(&v.to_string(), len)?),
    };
    let steps = step_budget(&state, &model, len, req.steps)?;
    let doc = blocking(move || {
        let models = ModelSet::single(model_mode(&model), (*model).clone());
        let request = HarmonizationRequest {
            melody: req.melody,
            voice: req.voice,
            constraints,
            keys,
            sampler: SamplerConfig { total_steps: Some(steps), seed: req.seed, ..Default::default() },
        };
        let h = reharmonize(&models, &request)?;
        let piece: serde_json::Value =
            serde_json::from_str(&harmonization_document(format!("{id}-reharmonized-{}", req.seed), None, &h))
                .expect("corpus documents are JSON");
        let keytrack: serde_json::Value = serde_json::from_str(&h.keys.to_json()).expect("key tracks are JSON");
        Ok(serde_json::json!({ "piece": piece, "keytrack": keytrack }).to_string())
    })
    .await?;
    Ok(json_reply(StatusCode::OK, doc))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainBody {
    corpus: serde_json::Value,
    config: serde_json::Value,
    #[serde(default)]
    mode: Option<Mode>,
}

async fn submit_train(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let req: TrainBody = parse_body(&body)?;
    let config = TrainConfigFile::parse(&req.config.to_string())?;
    let corpus = prepare_corpus(&read_training_corpus(&req.corpus.to_string(), &config)?, req.mode)?;
    // reject bad scopes now rather than as a failed job
    config.topology(&corpus)?;
    let record = state.jobs.submit(JobKind::Train).ok_or_else(|| {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "QueueFull", "training queue is full; retry later")
    })?;
    let id = record.id.clone();
    let st = state.clone();
    tokio::spawn(async move {
        let permit = st.jobs.workers().acquire_owned().await.expect("worker semaphore stays open");
        st.jobs.start(&id).expect("queued jobs can start");
        let worker = st.clone();
        let result = tokio::task::spawn_blocking(move || -> polymax::Result<(String, PathBuf)> {
            let summary = train_model(&corpus, &config)?;
            worker.store.insert(&summary.model)
        })
        .await;
        let outcome = match result {
            Ok(Ok((model_id, path))) => st.jobs.succeed(&id, vec![path.display().to_string()], Some(model_id)),
            Ok(Err(e)) => st.jobs.fail(&id, format!("{}: {e}", e.kind())),
            Err(e) => st.jobs.fail(&id, format!("training task panicked: {e}")),
        };
        outcome.expect("running jobs can finish");
        drop(permit);
    });
    Ok(json_reply(StatusCode::ACCEPTED, serde_json::to_string(&record).expect("records serialize")))
}

async fn get_job(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let record = state.jobs.get(&id).ok_or_else(|| ApiError::not_found(format!("unknown job {id:?}")))?;
    Ok(json_reply(StatusCode::OK, serde_json::to_string(&record).expect("records serialize")))
}
