//! Re-estimating a running application's total run time as its jobs finish.
//!
//! Finished jobs contribute their observed durations as constants and drop
//! out of the random sum; only the unfinished jobs (and the overhead) are
//! sampled. The adaptive variant also re-centers the per-run iterative mean
//! on the iterative durations observed so far.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::{FittedModel, NormalParams};
use crate::predict::{quantiles, IterTerm, ModelKind, PredictError, PredictiveSample, SumPlan};
use crate::trace::{ApplicationRun, JobKind, JobRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Keep the fitted per-run mean distribution.
    #[default]
    FixedAMean,
    /// Move the per-run mean's location to the average observed iterative
    /// duration once any iterative job has finished.
    AdaptiveAMean,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::FixedAMean => "fixed",
            Variant::AdaptiveAMean => "adaptive",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(Variant::FixedAMean),
            "adaptive" => Ok(Variant::AdaptiveAMean),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinishedJob {
    pub index: usize,
    pub kind: JobKind,
    pub duration_s: f64,
}

/// A partially executed application.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineState {
    model: FittedModel,
    structure: ModelKind,
    variant: Variant,
    layout: Vec<JobKind>,
    finished: Vec<FinishedJob>,
    remaining_noniter: Vec<usize>,
    remaining_iter_count: usize,
    /// Location of the per-run iterative mean currently in use.
    working_loc: f64,
    observed_iter: usize,
}

impl OnlineState {
    /// Nothing finished yet, using the dependent structure.
    pub fn new(model: FittedModel, variant: Variant) -> Self {
        Self::with_structure(model, variant, ModelKind::Dependent)
    }

    pub fn with_structure(model: FittedModel, variant: Variant, structure: ModelKind) -> Self {
        let layout = model.layout();
        let working_loc = match structure {
            ModelKind::Dependent => model.a_mean.loc,
            ModelKind::Independent => model.iter_pooled.loc,
        };
        Self {
            remaining_noniter: model.noniter.keys().copied().collect(),
            remaining_iter_count: model.n_iter_jobs,
            layout,
            model,
            structure,
            variant,
            finished: Vec::new(),
            working_loc,
            observed_iter: 0,
        }
    }

    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn structure(&self) -> ModelKind {
        self.structure
    }

    pub fn finished(&self) -> &[FinishedJob] {
        &self.finished
    }

    pub fn remaining_noniter(&self) -> &[usize] {
        &self.remaining_noniter
    }

    pub fn remaining_iter_count(&self) -> usize {
        self.remaining_iter_count
    }

    pub fn n_jobs(&self) -> usize {
        self.layout.len()
    }

    pub fn is_complete(&self) -> bool {
        self.finished.len() == self.layout.len()
    }

    /// Index of the job expected to finish next.
    pub fn next_index(&self) -> Option<usize> {
        (!self.is_complete()).then_some(self.finished.len())
    }

    /// Sum of observed durations, in finishing order.
    pub fn elapsed(&self) -> f64 {
        self.finished.iter().map(|j| j.duration_s).sum()
    }

    /// The per-run iterative mean in use (location possibly re-centered).
    pub fn working_a_mean(&self) -> NormalParams {
        NormalParams {
            loc: self.working_loc,
            scale: self.model.a_mean.scale,
        }
    }

    /// Records `job` as finished and returns the new state.
    pub fn advance(&self, job: &JobRecord) -> Result<OnlineState, OnlineError> {
        let expected = self.next_index().ok_or(OnlineError::Sequence {
            expected: None,
            got: job.index,
        })?;
        if job.index != expected {
            return Err(OnlineError::Sequence {
                expected: Some(expected),
                got: job.index,
            });
        }
        let kind = self.layout[expected];
        if job.kind != kind {
            return Err(OnlineError::Structure(format!(
                "job {} is {:?} but the model expects {:?}",
                job.index, job.kind, kind
            )));
        }
        let duration_s = job.duration();
        if !duration_s.is_finite() || duration_s < 0.0 {
            return Err(OnlineError::Structure(format!(
                "job {} has invalid duration {duration_s}",
                job.index
            )));
        }

        let mut next = self.clone();
        next.finished.push(FinishedJob {
            index: job.index,
            kind,
            duration_s,
        });
        match kind {
            JobKind::NonIterative => next.remaining_noniter.retain(|&k| k != job.index),
            JobKind::Iterative => {
                next.remaining_iter_count -= 1;
                next.observed_iter += 1;
                if self.variant == Variant::AdaptiveAMean {
                    // running mean: exact when every observation equals the current value
                    if next.observed_iter == 1 {
                        next.working_loc = duration_s;
                    } else {
                        next.working_loc += (duration_s - next.working_loc) / next.observed_iter as f64;
                    }
                }
            }
        }
        Ok(next)
    }

    fn plan(&self) -> SumPlan {
        let iter_base = match self.structure {
            ModelKind::Independent => NormalParams {
                loc: self.working_loc,
                scale: self.model.iter_pooled.scale,
            },
            ModelKind::Dependent => self.model.iter_pooled,
        };
        SumPlan {
            constant: self.elapsed(),
            noniter: self.remaining_noniter.iter().map(|k| self.model.noniter[k]).collect(),
            iter_count: self.remaining_iter_count,
            iter: IterTerm::for_kind(
                self.structure,
                iter_base,
                self.working_a_mean(),
                self.model.iter_scale_dep,
            ),
            overhead: self.model.overhead,
        }
    }

    /// Expected total run time given what has finished.
    pub fn analytic_mean(&self) -> f64 {
        self.plan().mean()
    }

    /// Predictive variance of the total run time given what has finished.
    pub fn analytic_variance(&self) -> f64 {
        self.plan().variance()
    }

    /// Samples of the total run time: observed durations plus draws for
    /// everything still outstanding.
    pub fn predict_total(&self, samples: usize, seed: u64) -> Result<PredictiveSample, PredictError> {
        Ok(PredictiveSample {
            values: self.plan().sample(samples, seed)?,
            model_kind: self.structure,
            seed,
        })
    }
}

/// Predicted total run time percentiles after a number of finished jobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Index of the job that just finished; -1 before any job finishes.
    pub after_job_index: i64,
    pub p10: f64,
    pub p20: f64,
    pub p50: f64,
    pub p80: f64,
    pub p90: f64,
}

impl TrajectoryPoint {
    pub const PERCENTILES: [f64; 5] = [0.10, 0.20, 0.50, 0.80, 0.90];

    pub fn from_sample(after_job_index: i64, sample: &PredictiveSample) -> Result<Self, PredictError> {
        let q = quantiles(&sample.values, &Self::PERCENTILES)?;
        Ok(Self {
            after_job_index,
            p10: q[0],
            p20: q[1],
            p50: q[2],
            p80: q[3],
            p90: q[4],
        })
    }

    pub fn contains(&self, total: f64) -> bool {
        (self.p10..=self.p90).contains(&total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub structure: ModelKind,
    /// Predict and compare wall time (true) or the job-time sum alone.
    pub include_overhead: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            structure: ModelKind::Dependent,
            include_overhead: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// What the predictions are aiming at: wall time, or the job sum when
    /// overhead is excluded.
    pub actual_total: f64,
}

impl Trajectory {
    /// CSV with header `after_job_index,p10,p20,p50,p80,p90,actual_total`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["after_job_index", "p10", "p20", "p50", "p80", "p90", "actual_total"])?;
        for p in &self.points {
            w.write_record([
                p.after_job_index.to_string(),
                p.p10.to_string(),
                p.p20.to_string(),
                p.p50.to_string(),
                p.p80.to_string(),
                p.p90.to_string(),
                self.actual_total.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Replays `actual` job by job, predicting the total after each one.
///
/// The first point is the prior, before any job has finished.
pub fn run_trajectory(
    model: &FittedModel,
    actual: &ApplicationRun,
    variant: Variant,
    samples: usize,
    seed: u64,
    options: &TrajectoryOptions,
) -> Result<Trajectory, OnlineError> {
    let layout = model.layout();
    if actual.kinds() != layout {
        return Err(OnlineError::Structure(format!(
            "run `{}` has {} jobs with a different layout than the model's {}",
            actual.app_id,
            actual.jobs.len(),
            layout.len()
        )));
    }
    let (model, actual_total) = if options.include_overhead {
        (model.clone(), actual.wall_time_s)
    } else {
        (model.without_overhead(), actual.job_sum())
    };
    let mut state = OnlineState::with_structure(model, variant, options.structure);
    let mut points = Vec::with_capacity(actual.jobs.len() + 1);
    points.push(TrajectoryPoint::from_sample(-1, &state.predict_total(samples, seed)?)?);
    for job in &actual.jobs {
        state = state.advance(job)?;
        let sample = state.predict_total(samples, seed)?;
        points.push(TrajectoryPoint::from_sample(job.index as i64, &sample)?);
    }
    Ok(Trajectory { points, actual_total })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OnlineError {
    #[error("job {got} finished out of order (expected {})", .expected.map_or("no more jobs".to_string(), |e| format!("job {e}")))]
    Sequence { expected: Option<usize>, got: usize },
    #[error("run does not match the model: {0}")]
    Structure(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
}
