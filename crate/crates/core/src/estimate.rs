//! Parameter estimation for the independent and dependent run-time models.
//!
//! Iterative jobs are pooled across indices and runs; each non-iterative job
//! index gets its own normal. The dependent model adds a latent per-run mean
//! for iterative jobs whose statistics come from each run's average
//! iterative-job duration.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{JobKind, TraceSet};

/// Location and scale of a normal variable, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub loc: f64,
    pub scale: f64,
}

impl NormalParams {
    pub const ZERO: NormalParams = NormalParams { loc: 0.0, scale: 0.0 };

    pub fn new(loc: f64, scale: f64) -> Result<Self, EstimateError> {
        let p = Self { loc, scale };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), EstimateError> {
        if !self.loc.is_finite() || !self.scale.is_finite() || self.scale < 0.0 {
            return Err(EstimateError::InvalidParams {
                loc: self.loc,
                scale: self.scale,
            });
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        self.scale * self.scale
    }

    /// Sample mean and sample standard deviation (divisor n - 1).
    ///
    /// Identical values give exactly that value and a scale of exactly zero.
    /// Fewer than two values give a zero scale.
    pub fn from_sample(values: &[f64]) -> Option<Self> {
        let first = *values.first()?;
        if values.iter().all(|&v| v == first) {
            return Some(Self { loc: first, scale: 0.0 });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Some(Self {
            loc: mean,
            scale: (ss / (n - 1.0)).sqrt(),
        })
    }
}

/// Estimated parameters of both models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    /// Per job index, for non-iterative jobs.
    pub noniter: BTreeMap<usize, NormalParams>,
    /// Every iterative job duration, pooled.
    pub iter_pooled: NormalParams,
    /// Distribution of a run's average iterative-job duration.
    pub a_mean: NormalParams,
    /// Scale of an iterative job around its run's mean (dependent model).
    pub iter_scale_dep: f64,
    /// Wall time not covered by jobs.
    pub overhead: NormalParams,
    pub n_iter_jobs: usize,
    pub n_runs: usize,
}

impl FittedModel {
    pub fn n_jobs(&self) -> usize {
        self.noniter.len() + self.n_iter_jobs
    }

    /// Job kinds by index, reconstructed from which indices are non-iterative.
    pub fn layout(&self) -> Vec<JobKind> {
        (0..self.n_jobs())
            .map(|i| {
                if self.noniter.contains_key(&i) {
                    JobKind::NonIterative
                } else {
                    JobKind::Iterative
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        for p in self.noniter.values() {
            p.check()?;
        }
        self.iter_pooled.check()?;
        self.a_mean.check()?;
        self.overhead.check()?;
        NormalParams::new(0.0, self.iter_scale_dep)?;
        if self.n_iter_jobs == 0 {
            return Err(EstimateError::NoIterativeJobs);
        }
        if let Some(&k) = self.noniter.keys().find(|&&k| k >= self.n_jobs()) {
            return Err(EstimateError::Structure(format!(
                "non-iterative index {k} is outside a {}-job application",
                self.n_jobs()
            )));
        }
        Ok(())
    }

    /// Same model with the overhead term pinned to zero.
    pub fn without_overhead(&self) -> FittedModel {
        FittedModel {
            overhead: NormalParams::ZERO,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("models always serialize");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, EstimateError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let model: FittedModel = serde_path_to_error::deserialize(de).map_err(|e| EstimateError::Malformed {
            path: e.path().to_string(),
            reason: e.inner().to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverheadMode {
    #[default]
    Fitted,
    Zero,
}

impl FromStr for OverheadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fitted" => Ok(OverheadMode::Fitted),
            "zero" => Ok(OverheadMode::Zero),
            other => Err(format!("unknown overhead mode `{other}`")),
        }
    }
}

/// How the dependent model's per-job scale is estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependentScale {
    /// Reuse the pooled iterative scale.
    #[default]
    Pooled,
    /// Spread of iterative jobs around their own run's mean.
    WithinRun,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    #[serde(default)]
    pub overhead: OverheadMode,
    #[serde(default)]
    pub dependent_scale: DependentScale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub model: FittedModel,
    /// Runs left out of the overhead estimate because their jobs overlap.
    pub excluded_from_overhead: Vec<String>,
}

pub fn fit(traces: &TraceSet, options: &FitOptions) -> Result<Fit, EstimateError> {
    let runs = traces.runs();
    if runs.len() < 2 {
        return Err(EstimateError::InsufficientData { runs: runs.len() });
    }
    let reference = traces.modal_job_count().unwrap_or_default();
    let offenders: Vec<String> = runs
        .iter()
        .filter(|r| r.jobs.len() != reference)
        .map(|r| format!("{} ({} jobs)", r.app_id, r.jobs.len()))
        .collect();
    if !offenders.is_empty() {
        return Err(EstimateError::Structure(format!(
            "runs differ from the common {reference}-job structure: {}",
            offenders.join(", ")
        )));
    }
    let layout = runs[0].kinds();
    let mismatched: Vec<&str> = runs
        .iter()
        .filter(|r| r.kinds() != layout)
        .map(|r| r.app_id.as_str())
        .collect();
    if !mismatched.is_empty() {
        return Err(EstimateError::Structure(format!(
            "job kinds differ from run {}: {}",
            runs[0].app_id,
            mismatched.join(", ")
        )));
    }
    let n_iter_jobs = layout.iter().filter(|&&k| k == JobKind::Iterative).count();
    if n_iter_jobs == 0 {
        return Err(EstimateError::NoIterativeJobs);
    }

    let pooled: Vec<f64> = runs.iter().flat_map(|r| r.iterative_durations()).collect();
    let iter_pooled = NormalParams::from_sample(&pooled).expect("at least one iterative job");

    let run_means: Vec<f64> = runs
        .iter()
        .map(|r| {
            let d: Vec<f64> = r.iterative_durations().collect();
            NormalParams::from_sample(&d).expect("run has iterative jobs").loc
        })
        .collect();
    let a_mean = NormalParams::from_sample(&run_means).expect("at least two runs");

    let noniter = layout
        .iter()
        .enumerate()
        .filter(|(_, &k)| k == JobKind::NonIterative)
        .map(|(index, _)| {
            let d: Vec<f64> = runs.iter().map(|r| r.jobs[index].duration()).collect();
            (index, NormalParams::from_sample(&d).expect("at least two runs"))
        })
        .collect();

    let iter_scale_dep = match options.dependent_scale {
        DependentScale::Pooled => iter_pooled.scale,
        DependentScale::WithinRun => {
            let ss: f64 = runs
                .iter()
                .zip(&run_means)
                .flat_map(|(r, &m)| r.iterative_durations().map(move |d| (d - m) * (d - m)))
                .sum();
            let dof = pooled.len() - runs.len();
            if dof == 0 {
                0.0
            } else {
                (ss / dof as f64).sqrt()
            }
        }
    };

    let mut excluded_from_overhead = Vec::new();
    let overhead = match options.overhead {
        OverheadMode::Zero => NormalParams::ZERO,
        OverheadMode::Fitted => {
            let mut residuals = Vec::with_capacity(runs.len());
            for run in runs {
                if run.has_negative_overhead() {
                    tracing::warn!("{}: negative overhead, excluded from the overhead estimate", run.app_id);
                    excluded_from_overhead.push(run.app_id.clone());
                } else {
                    residuals.push(run.overhead());
                }
            }
            NormalParams::from_sample(&residuals).ok_or(EstimateError::AllRunsExcluded)?
        }
    };

    let model = FittedModel {
        noniter,
        iter_pooled,
        a_mean,
        iter_scale_dep,
        overhead,
        n_iter_jobs,
        n_runs: runs.len(),
    };
    model.validate()?;
    Ok(Fit {
        model,
        excluded_from_overhead,
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("need at least 2 runs to fit, got {runs}")]
    InsufficientData { runs: usize },
    #[error("inconsistent run structure: {0}")]
    Structure(String),
    #[error("no iterative jobs; set an iterative window")]
    NoIterativeJobs,
    #[error("every run has negative overhead, nothing left to estimate the overhead from")]
    AllRunsExcluded,
    #[error("invalid normal parameters (loc = {loc}, scale = {scale})")]
    InvalidParams { loc: f64, scale: f64 },
    #[error("malformed model document at `{path}`: {reason}")]
    Malformed { path: String, reason: String },
}
