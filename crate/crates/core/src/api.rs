//! Request and response bodies of the HTTP service.

use serde::{Deserialize, Serialize};

use crate::estimate::{FitOptions, FittedModel, NormalParams};
use crate::ingest::{IngestOptions, LogSource};
use crate::online::{TrajectoryOptions, TrajectoryPoint, Variant};
use crate::predict::{Ecdf, ModelKind, PredictiveSample, SampleSummary, DEFAULT_SAMPLES};
use crate::synth::GeneratorSpec;
use crate::trace::{ApplicationRun, IterativeWindow, TraceSet};
use crate::ErrorClass;

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

/// Body of every non-2xx response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub class: ErrorClass,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestRequest {
    pub logs: Vec<LogSource>,
    pub window: IterativeWindow,
    #[serde(default)]
    pub options: IngestOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    pub traces: TraceSet,
    #[serde(default)]
    pub options: FitOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub model: FittedModel,
    pub kind: ModelKind,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub sample: PredictiveSample,
    pub summary: SampleSummary,
    pub ecdf: Ecdf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRequest {
    pub model: FittedModel,
    pub run: ApplicationRun,
    pub variant: Variant,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: TrajectoryOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthRequest {
    pub spec: GeneratorSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRequest {
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub ks: f64,
    pub predicted_ecdf: Ecdf,
    pub actual_ecdf: Ecdf,
    pub predicted_summary: SampleSummary,
    pub actual_summary: SampleSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub model: FittedModel,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default = "dependent")]
    pub structure: ModelKind,
    /// When false the overhead term is dropped from predictions.
    #[serde(default = "yes")]
    pub include_overhead: bool,
}

fn dependent() -> ModelKind {
    ModelKind::Dependent
}

fn yes() -> bool {
    true
}

/// Where a live online session stands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: u64,
    pub variant: Variant,
    pub n_jobs: usize,
    pub finished: usize,
    pub next_index: Option<usize>,
    pub elapsed_s: f64,
    pub working_a_mean: NormalParams,
    pub analytic_mean: f64,
    pub analytic_variance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionQuery {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PredictionQuery {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionPrediction {
    pub session: SessionInfo,
    pub point: TrajectoryPoint,
    pub summary: SampleSummary,
}
