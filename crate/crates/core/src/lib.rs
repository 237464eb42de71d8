//! Run-time modeling for iterative big-data applications.
//!
//! Job-level traces of past runs (from Spark event logs or the synthetic
//! generator) are fitted into two normal models of application run time:
//! one where iterative jobs are independent and one where they share a
//! latent per-run mean. Both are sampled by forward Monte Carlo, and a
//! running application's total can be re-estimated after every job.
//!
//! ```
//! use runtime_oracle::{estimate, predict, synth};
//!
//! let spec: synth::GeneratorSpec = serde_json::from_str(r#"{
//!     "n_runs": 50, "n_iter": 5,
//!     "iter_base": {"loc": 8.0, "scale": 0.5}, "app_offset_scale": 1.0,
//!     "overhead_true": {"loc": 1.0, "scale": 0.1}, "seed": 7
//! }"#).unwrap();
//! let traces = synth::generate(&spec).unwrap().traces;
//! let model = estimate::fit(&traces, &Default::default()).unwrap().model;
//! let sample = predict::sample_app(&model, predict::ModelKind::Dependent, 1000, 1).unwrap();
//! println!("{}", sample.summary().unwrap());
//! ```

pub mod api;
pub mod estimate;
pub mod ingest;
pub mod online;
pub mod predict;
pub mod synth;
pub mod trace;

#[cfg(test)]
pub(crate) mod testutil;

pub use estimate::{fit, FitOptions, FittedModel, NormalParams};
pub use online::{run_trajectory, OnlineState, TrajectoryPoint, Variant};
pub use predict::{ks_distance, quantile, sample_app, Ecdf, ModelKind, PredictiveSample};
pub use trace::{classify_jobs, parse_traces, serialize_traces, ApplicationRun, JobKind, JobRecord, TraceSet};

/// Coarse classification of failures, shared by the service's status codes
/// and the command line's exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    /// Input could not be decoded.
    Parse,
    /// Input decoded but breaks a structural or statistical precondition.
    Invariant,
    /// A caller-supplied argument is out of range.
    Argument,
    NotFound,
}

/// Any error from this crate.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Trace(#[from] trace::TraceError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Estimate(#[from] estimate::EstimateError),
    #[error(transparent)]
    Predict(#[from] predict::PredictError),
    #[error(transparent)]
    Online(#[from] online::OnlineError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use estimate::EstimateError as E;
        use predict::PredictError as P;
        use trace::TraceError as T;
        match self {
            Error::Trace(T::Malformed { .. }) => ErrorClass::Parse,
            Error::Trace(T::BadWindowSyntax(_)) | Error::Trace(T::InvertedWindow { .. }) => ErrorClass::Argument,
            Error::Trace(_) => ErrorClass::Invariant,
            Error::Ingest(ingest::IngestError::EmptyInput) => ErrorClass::Argument,
            Error::Ingest(_) => ErrorClass::Parse,
            Error::Estimate(E::Malformed { .. }) => ErrorClass::Parse,
            Error::Estimate(_) => ErrorClass::Invariant,
            Error::Predict(P::BadValue { .. }) => ErrorClass::Parse,
            Error::Predict(P::EmptySample) => ErrorClass::Invariant,
            Error::Predict(_) => ErrorClass::Argument,
            Error::Online(online::OnlineError::Predict(P::BadValue { .. })) => ErrorClass::Parse,
            Error::Online(online::OnlineError::Predict(_)) => ErrorClass::Argument,
            Error::Online(_) => ErrorClass::Invariant,
            Error::Synth(_) => ErrorClass::Argument,
        }
    }
}
