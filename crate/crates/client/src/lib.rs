//! Async client for the runtime-oracle HTTP service.
//!
//! Every method maps onto one endpoint and returns the service's typed
//! response; failures reported by the service keep their [`ErrorClass`].

use reqwest::{Method, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use runtime_oracle::api::*;
use runtime_oracle::estimate::{Fit, FitOptions, FittedModel};
use runtime_oracle::ingest::{IngestOptions, LogSource};
use runtime_oracle::online::{Trajectory, TrajectoryOptions, Variant};
use runtime_oracle::predict::ModelKind;
use runtime_oracle::synth::{GeneratorSpec, Synthesized};
use runtime_oracle::trace::{ApplicationRun, IterativeWindow, JobRecord, TraceSet};
use runtime_oracle::ErrorClass;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("service unreachable: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("{message}")]
    Api {
        status: StatusCode,
        class: ErrorClass,
        message: String,
    },
}

impl ClientError {
    /// Class of a service-side failure; `None` for transport problems.
    pub fn class(&self) -> Option<ErrorClass> {
        match self {
            ClientError::Api { class, .. } => Some(*class),
            ClientError::Transport(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    /// Like [`Client::new`] but ignores proxy settings from the environment,
    /// for a service on the loopback interface.
    pub fn direct(base: impl Into<String>) -> Self {
        let http = reqwest::Client::builder()
            .no_proxy()
            .build()
            .expect("default TLS-free client always builds");
        Self {
            http,
            ..Self::new(base)
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{path}", self.base))
    }

    async fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, ClientError> {
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let bytes = resp.bytes().await?;
        Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(body) => ClientError::Api {
                status,
                class: body.class,
                message: body.message,
            },
            Err(_) => ClientError::Api {
                status,
                class: ErrorClass::Argument,
                message: format!("{status}: {}", String::from_utf8_lossy(&bytes)),
            },
        })
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        self.send(self.request(Method::POST, path).json(body)).await
    }

    pub async fn health(&self) -> Result<bool, ClientError> {
        let resp = self.request(Method::GET, "/health").send().await?;
        Ok(resp.status().is_success())
    }

    pub async fn ingest(
        &self,
        logs: Vec<LogSource>,
        window: IterativeWindow,
        options: IngestOptions,
    ) -> Result<TraceSet, ClientError> {
        self.post("/v1/ingest", &IngestRequest { logs, window, options }).await
    }

    pub async fn fit(&self, traces: TraceSet, options: FitOptions) -> Result<Fit, ClientError> {
        self.post("/v1/fit", &FitRequest { traces, options }).await
    }

    pub async fn predict(
        &self,
        model: FittedModel,
        kind: ModelKind,
        samples: usize,
        seed: u64,
    ) -> Result<PredictResponse, ClientError> {
        let req = PredictRequest {
            model,
            kind,
            samples,
            seed,
        };
        self.post("/v1/predict", &req).await
    }

    pub async fn trajectory(
        &self,
        model: FittedModel,
        run: ApplicationRun,
        variant: Variant,
        samples: usize,
        seed: u64,
        options: TrajectoryOptions,
    ) -> Result<Trajectory, ClientError> {
        let req = TrajectoryRequest {
            model,
            run,
            variant,
            samples,
            seed,
            options,
        };
        self.post("/v1/trajectory", &req).await
    }

    pub async fn synth(&self, spec: GeneratorSpec) -> Result<Synthesized, ClientError> {
        self.post("/v1/synth", &SynthRequest { spec }).await
    }

    pub async fn compare(&self, predicted: Vec<f64>, actual: Vec<f64>) -> Result<CompareResponse, ClientError> {
        self.post("/v1/compare", &CompareRequest { predicted, actual }).await
    }

    pub async fn open_session(&self, req: &CreateSessionRequest) -> Result<SessionInfo, ClientError> {
        self.post("/v1/sessions", req).await
    }

    pub async fn session(&self, id: u64) -> Result<SessionInfo, ClientError> {
        self.send(self.request(Method::GET, &format!("/v1/sessions/{id}")))
            .await
    }

    pub async fn finish_job(&self, id: u64, job: &JobRecord) -> Result<SessionInfo, ClientError> {
        self.post(&format!("/v1/sessions/{id}/jobs"), job).await
    }

    pub async fn session_prediction(&self, id: u64, query: PredictionQuery) -> Result<SessionPrediction, ClientError> {
        let req = self
            .request(Method::GET, &format!("/v1/sessions/{id}/prediction"))
            .query(&[("samples", query.samples as u64), ("seed", query.seed)]);
        self.send(req).await
    }

    pub async fn close_session(&self, id: u64) -> Result<(), ClientError> {
        let resp = self
            .request(Method::DELETE, &format!("/v1/sessions/{id}"))
            .send()
            .await?;
        if resp.status() == StatusCode::NO_CONTENT {
            return Ok(());
        }
        let status = resp.status();
        let body: ErrorBody = resp.json().await?;
        Err(ClientError::Api {
            status,
            class: body.class,
            message: body.message,
        })
    }
}
