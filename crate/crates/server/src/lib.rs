//! HTTP/JSON front end for the run-time models.
//!
//! Stateless endpoints wrap ingestion, fitting, sampling, trajectories,
//! synthesis and comparison. Online sessions hold the state of a running
//! application so a job tracker can report each finished job and ask for an
//! updated prediction.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/health` | | `ok` |
//! | POST | `/v1/ingest` | `IngestRequest` | `TraceSet` |
//! | POST | `/v1/fit` | `FitRequest` | `Fit` |
//! | POST | `/v1/predict` | `PredictRequest` | `PredictResponse` |
//! | POST | `/v1/trajectory` | `TrajectoryRequest` | `Trajectory` |
//! | POST | `/v1/synth` | `SynthRequest` | `Synthesized` |
//! | POST | `/v1/compare` | `CompareRequest` | `CompareResponse` |
//! | POST | `/v1/sessions` | `CreateSessionRequest` | `SessionInfo` |
//! | GET | `/v1/sessions/{id}` | | `SessionInfo` |
//! | POST | `/v1/sessions/{id}/jobs` | `JobRecord` | `SessionInfo` |
//! | GET | `/v1/sessions/{id}/prediction?samples=&seed=` | | `SessionPrediction` |
//! | DELETE | `/v1/sessions/{id}` | | 204 |

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;

use runtime_oracle::api::*;
use runtime_oracle::estimate::{fit, Fit};
use runtime_oracle::ingest::ingest_sources;
use runtime_oracle::online::{run_trajectory, OnlineState, Trajectory, TrajectoryPoint};
use runtime_oracle::predict::{ks_distance, sample_app, Ecdf, SampleSummary};
use runtime_oracle::synth::{generate, Synthesized};
use runtime_oracle::trace::{JobRecord, TraceSet};
use runtime_oracle::{Error, ErrorClass};

const BODY_LIMIT: usize = 512 * 1024 * 1024;

/// A failed request, rendered as an [`ErrorBody`].
#[derive(Debug)]
pub struct ApiError {
    pub class: ErrorClass,
    pub message: String,
}

impl ApiError {
    fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }
}

impl<E: Into<Error>> From<E> for ApiError {
    fn from(err: E) -> Self {
        let err = err.into();
        Self::new(err.class(), err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.class {
            ErrorClass::Parse | ErrorClass::Argument => StatusCode::BAD_REQUEST,
            ErrorClass::Invariant => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorClass::NotFound => StatusCode::NOT_FOUND,
        };
        let body = ErrorBody {
            class: self.class,
            message: self.message,
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T: DeserializeOwned>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::new(ErrorClass::Parse, e.body_text()))
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(ErrorClass::Argument, format!("worker failed: {e}")))?
}

#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<u64, OnlineState>>,
    next_id: AtomicU64,
}

impl AppState {
    fn with_session<T>(&self, id: u64, f: impl FnOnce(&mut OnlineState) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let mut sessions = self.sessions.lock().expect("session map poisoned");
        let state = sessions
            .get_mut(&id)
            .ok_or_else(|| ApiError::new(ErrorClass::NotFound, format!("no session {id}")))?;
        f(state)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }
}

pub fn router() -> Router {
    router_with_state(Arc::new(AppState::default()))
}

pub fn router_with_state(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/v1/ingest", post(ingest))
        .route("/v1/fit", post(fit_traces))
        .route("/v1/predict", post(predict))
        .route("/v1/trajectory", post(trajectory))
        .route("/v1/synth", post(synth))
        .route("/v1/compare", post(compare))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/jobs", post(finish_job))
        .route("/v1/sessions/{id}/prediction", get(session_prediction))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

async fn ingest(payload: Result<Json<IngestRequest>, JsonRejection>) -> ApiResult<TraceSet> {
    let req = body(payload)?;
    let set = blocking(move || Ok(ingest_sources(&req.logs, req.window, &req.options)?)).await?;
    Ok(Json(set))
}

async fn fit_traces(payload: Result<Json<FitRequest>, JsonRejection>) -> ApiResult<Fit> {
    let req = body(payload)?;
    Ok(Json(fit(&req.traces, &req.options)?))
}

async fn predict(payload: Result<Json<PredictRequest>, JsonRejection>) -> ApiResult<PredictResponse> {
    let req = body(payload)?;
    req.model.validate()?;
    let resp = blocking(move || {
        let sample = sample_app(&req.model, req.kind, req.samples, req.seed)?;
        Ok(PredictResponse {
            summary: sample.summary()?,
            ecdf: sample.ecdf()?,
            sample,
        })
    })
    .await?;
    Ok(Json(resp))
}

async fn trajectory(payload: Result<Json<TrajectoryRequest>, JsonRejection>) -> ApiResult<Trajectory> {
    let req = body(payload)?;
    req.model.validate()?;
    let t = blocking(move || {
        Ok(run_trajectory(
            &req.model,
            &req.run,
            req.variant,
            req.samples,
            req.seed,
            &req.options,
        )?)
    })
    .await?;
    Ok(Json(t))
}

async fn synth(payload: Result<Json<SynthRequest>, JsonRejection>) -> ApiResult<Synthesized> {
    let req = body(payload)?;
    Ok(Json(blocking(move || Ok(generate(&req.spec)?)).await?))
}

async fn compare(payload: Result<Json<CompareRequest>, JsonRejection>) -> ApiResult<CompareResponse> {
    let req = body(payload)?;
    let resp = blocking(move || {
        Ok(CompareResponse {
            ks: ks_distance(&req.predicted, &req.actual)?,
            predicted_ecdf: Ecdf::new(&req.predicted)?,
            actual_ecdf: Ecdf::new(&req.actual)?,
            predicted_summary: SampleSummary::of(&req.predicted)?,
            actual_summary: SampleSummary::of(&req.actual)?,
        })
    })
    .await?;
    Ok(Json(resp))
}

fn info(id: u64, state: &OnlineState) -> SessionInfo {
    SessionInfo {
        id,
        variant: state.variant(),
        n_jobs: state.n_jobs(),
        finished: state.finished().len(),
        next_index: state.next_index(),
        elapsed_s: state.elapsed(),
        working_a_mean: state.working_a_mean(),
        analytic_mean: state.analytic_mean(),
        analytic_variance: state.analytic_variance(),
    }
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    payload: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionInfo>), ApiError> {
    let req = body(payload)?;
    req.model.validate()?;
    let model = if req.include_overhead {
        req.model
    } else {
        req.model.without_overhead()
    };
    let state = OnlineState::with_structure(model, req.variant, req.structure);
    let id = app.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let out = info(id, &state);
    app.sessions.lock().expect("session map poisoned").insert(id, state);
    tracing::info!(id, "session opened");
    Ok((StatusCode::CREATED, Json(out)))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<SessionInfo> {
    Ok(Json(app.with_session(id, |s| Ok(info(id, s)))?))
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    match app.sessions.lock().expect("session map poisoned").remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::new(ErrorClass::NotFound, format!("no session {id}"))),
    }
}

async fn finish_job(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    payload: Result<Json<JobRecord>, JsonRejection>,
) -> ApiResult<SessionInfo> {
    let job = body(payload)?;
    let out = app.with_session(id, |s| {
        *s = s.advance(&job)?;
        Ok(info(id, s))
    })?;
    Ok(Json(out))
}

async fn session_prediction(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    query: Result<Query<PredictionQuery>, QueryRejection>,
) -> ApiResult<SessionPrediction> {
    let Query(q) = query.map_err(|e| ApiError::new(ErrorClass::Argument, e.body_text()))?;
    let state = app.with_session(id, |s| Ok(s.clone()))?;
    let resp = blocking(move || {
        let sample = state.predict_total(q.samples, q.seed)?;
        let after = state.finished().last().map_or(-1, |j| j.index as i64);
        Ok(SessionPrediction {
            session: info(id, &state),
            point: TrajectoryPoint::from_sample(after, &sample)?,
            summary: sample.summary()?,
        })
    })
    .await?;
    Ok(Json(resp))
}

/// Serves on `listener` until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}
