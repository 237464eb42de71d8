//! Synthetic traces drawn from the hierarchical run-time process, with an
//! optional per-run garbage-collection delay.
//!
//! Each run gets a latent mean for its iterative jobs, optionally shifted by
//! a GC delay; iterative jobs scatter around it. Jobs run back to back from
//! t = 0 and the wall time adds a non-negative overhead.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::NormalParams;
use crate::predict::position_rng;
use crate::trace::{ApplicationRun, IterativeWindow, JobKind, JobRecord, TraceSet};

pub const DEFAULT_DURATION_FLOOR: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcSpec {
    /// Chance that a run is hit by GC delay.
    pub probability: f64,
    /// Added to the iterative mean of an affected run.
    pub delay: NormalParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_runs: usize,
    /// Per-index parameters of the non-iterative jobs.
    #[serde(default)]
    pub noniter: Vec<NormalParams>,
    /// How many non-iterative jobs precede the iterative block; defaults to all of them.
    #[serde(default)]
    pub iterative_start: Option<usize>,
    pub n_iter: usize,
    /// Location of the per-run mean, and job scatter around it.
    pub iter_base: NormalParams,
    /// Spread of the per-run mean across runs.
    pub app_offset_scale: f64,
    pub overhead_true: NormalParams,
    #[serde(default)]
    pub gc: Option<GcSpec>,
    pub seed: u64,
    #[serde(default = "default_floor")]
    pub duration_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_DURATION_FLOOR
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_runs == 0 {
            return bad("n_runs must be positive".into());
        }
        if self.n_iter == 0 {
            return bad("n_iter must be positive".into());
        }
        let params = self
            .noniter
            .iter()
            .map(|p| ("noniter", p))
            .chain([("iter_base", &self.iter_base), ("overhead_true", &self.overhead_true)]);
        for (name, p) in params {
            if p.check().is_err() {
                return bad(format!(
                    "{name} has invalid parameters (loc {}, scale {})",
                    p.loc, p.scale
                ));
            }
        }
        if !self.app_offset_scale.is_finite() || self.app_offset_scale < 0.0 {
            return bad(format!(
                "app_offset_scale {} must be finite and >= 0",
                self.app_offset_scale
            ));
        }
        if let Some(gc) = &self.gc {
            if !(0.0..=1.0).contains(&gc.probability) {
                return bad(format!("gc.probability {} outside [0, 1]", gc.probability));
            }
            if gc.delay.check().is_err() || gc.delay.loc <= 0.0 {
                return bad("gc.delay needs loc > 0 and a finite, non-negative scale".into());
            }
        }
        if !(self.duration_floor.is_finite() && self.duration_floor > 0.0) {
            return bad(format!("duration_floor {} must be positive", self.duration_floor));
        }
        if self.iterative_start.is_some_and(|s| s > self.noniter.len()) {
            return bad("iterative_start exceeds the number of non-iterative jobs".into());
        }
        Ok(())
    }

    fn iterative_start(&self) -> usize {
        self.iterative_start.unwrap_or(self.noniter.len())
    }

    pub fn window(&self) -> IterativeWindow {
        let first = self.iterative_start();
        IterativeWindow {
            first,
            last: first + self.n_iter - 1,
        }
    }

    pub fn n_jobs(&self) -> usize {
        self.noniter.len() + self.n_iter
    }

    /// Standard deviation of a run's average iterative duration (no GC).
    pub fn run_mean_scale(&self) -> f64 {
        (self.app_offset_scale.powi(2) + self.iter_base.variance() / self.n_iter as f64).sqrt()
    }

    /// Same spec with a different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Draws one run whose iterative jobs center on `offset`. Used both by
    /// [`generate`] and to build runs with a chosen offset.
    pub fn run_with_offset(&self, app_id: String, offset: f64, rng: &mut ChaCha8Rng) -> ApplicationRun {
        let normal = |rng: &mut ChaCha8Rng, p: NormalParams| {
            let z: f64 = rng.sample(StandardNormal);
            p.loc + p.scale * z
        };
        let window = self.window();
        let mut noniter = self.noniter.iter();
        let mut t = 0.0;
        let mut jobs = Vec::with_capacity(self.n_jobs());
        for index in 0..self.n_jobs() {
            let kind = window.kind_of(index);
            let params = match kind {
                JobKind::Iterative => NormalParams {
                    loc: offset,
                    scale: self.iter_base.scale,
                },
                JobKind::NonIterative => *noniter.next().expect("layout matches noniter count"),
            };
            let duration = normal(rng, params).max(self.duration_floor);
            jobs.push(JobRecord::new(index, kind, t, t + duration));
            t += duration;
        }
        let overhead = normal(rng, self.overhead_true).max(0.0);
        ApplicationRun {
            app_id,
            wall_time_s: t + overhead,
            jobs,
        }
    }
}

/// Realized latent values of one generated run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTruth {
    pub app_id: String,
    /// Per-run iterative mean, including any GC delay.
    pub offset: f64,
    pub gc_delay: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: GeneratorSpec,
    pub runs: Vec<RunTruth>,
}

impl GroundTruth {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("ground truth always serializes");
        out.push(b'\n');
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synthesized {
    pub traces: TraceSet,
    pub truth: GroundTruth,
}

/// Generates `spec.n_runs` runs. Run `i` uses its own stream of `spec.seed`.
pub fn generate(spec: &GeneratorSpec) -> Result<Synthesized, SynthError> {
    spec.validate()?;
    let width = spec.n_runs.to_string().len().max(4);
    let mut runs = Vec::with_capacity(spec.n_runs);
    let mut truths = Vec::with_capacity(spec.n_runs);
    for i in 0..spec.n_runs {
        let mut rng = position_rng(spec.seed, i as u64);
        let z: f64 = rng.sample(StandardNormal);
        let mut offset = spec.iter_base.loc + spec.app_offset_scale * z;
        let mut gc_delay = None;
        if let Some(gc) = &spec.gc {
            let hit = rng.random::<f64>() < gc.probability;
            let z: f64 = rng.sample(StandardNormal);
            if hit {
                let delay = (gc.delay.loc + gc.delay.scale * z).max(0.0);
                offset += delay;
                gc_delay = Some(delay);
            }
        }
        let app_id = format!("synth-{i:0width$}");
        runs.push(spec.run_with_offset(app_id.clone(), offset, &mut rng));
        truths.push(RunTruth {
            app_id,
            offset,
            gc_delay,
        });
    }
    let traces = TraceSet::new(runs, Some(spec.window())).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok(Synthesized {
        traces,
        truth: GroundTruth {
            spec: spec.clone(),
            runs: truths,
        },
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}
