//! Monte Carlo forward sampling of application run time, plus the
//! quantile, ECDF and Kolmogorov-Smirnov utilities used to compare
//! predicted and observed run-time distributions.
//!
//! Sample `i` is drawn from its own ChaCha stream keyed by `(seed, i)`, so a
//! sample set does not depend on how many threads produced it.

use std::cmp::Ordering;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::{FittedModel, NormalParams};

pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Iterative jobs drawn independently from the pooled normal.
    Independent,
    /// Iterative jobs share a per-run latent mean.
    Dependent,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Independent => "independent",
            ModelKind::Dependent => "dependent",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(ModelKind::Independent),
            "dependent" => Ok(ModelKind::Dependent),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// The random stream for one sample position.
pub fn position_rng(seed: u64, position: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(position);
    rng
}

fn draw<R: Rng>(rng: &mut R, p: NormalParams) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    p.loc + p.scale * z
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum IterTerm {
    Independent(NormalParams),
    Dependent { a_mean: NormalParams, scale: f64 },
}

/// A sum of normal terms: what is left of an application's run time.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct SumPlan {
    pub constant: f64,
    pub noniter: Vec<NormalParams>,
    pub iter_count: usize,
    pub iter: IterTerm,
    pub overhead: NormalParams,
}

impl SumPlan {
    pub fn full(model: &FittedModel, kind: ModelKind) -> Self {
        Self {
            constant: 0.0,
            noniter: model.noniter.values().copied().collect(),
            iter_count: model.n_iter_jobs,
            iter: IterTerm::for_kind(kind, model.iter_pooled, model.a_mean, model.iter_scale_dep),
            overhead: model.overhead,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let mut total = self.constant;
        for &p in &self.noniter {
            total += draw(rng, p);
        }
        match self.iter {
            IterTerm::Independent(p) => {
                for _ in 0..self.iter_count {
                    total += draw(rng, p);
                }
            }
            IterTerm::Dependent { a_mean, scale } => {
                if self.iter_count > 0 {
                    let loc = draw(rng, a_mean);
                    let job = NormalParams { loc, scale };
                    for _ in 0..self.iter_count {
                        total += draw(rng, job);
                    }
                }
            }
        }
        total + draw(rng, self.overhead)
    }

    pub fn mean(&self) -> f64 {
        let m = self.iter_count as f64;
        let iter_loc = match self.iter {
            IterTerm::Independent(p) => p.loc,
            IterTerm::Dependent { a_mean, .. } => a_mean.loc,
        };
        self.constant + self.noniter.iter().map(|p| p.loc).sum::<f64>() + m * iter_loc + self.overhead.loc
    }

    pub fn variance(&self) -> f64 {
        let m = self.iter_count as f64;
        let iter_var = match self.iter {
            IterTerm::Independent(p) => m * p.variance(),
            IterTerm::Dependent { a_mean, scale } => m * m * a_mean.variance() + m * scale * scale,
        };
        self.noniter.iter().map(NormalParams::variance).sum::<f64>() + iter_var + self.overhead.variance()
    }

    pub fn sample(&self, samples: usize, seed: u64) -> Result<Vec<f64>, PredictError> {
        if samples == 0 {
            return Err(PredictError::ZeroSamples);
        }
        Ok((0..samples as u64)
            .into_par_iter()
            .map(|i| self.draw(&mut position_rng(seed, i)))
            .collect())
    }
}

impl IterTerm {
    pub fn for_kind(kind: ModelKind, pooled: NormalParams, a_mean: NormalParams, scale_dep: f64) -> Self {
        match kind {
            ModelKind::Independent => IterTerm::Independent(pooled),
            ModelKind::Dependent => IterTerm::Dependent {
                a_mean,
                scale: scale_dep,
            },
        }
    }
}

/// Analytic mean and variance of the application run time under `kind`.
pub fn analytic_moments(model: &FittedModel, kind: ModelKind) -> (f64, f64) {
    let plan = SumPlan::full(model, kind);
    (plan.mean(), plan.variance())
}

/// Monte Carlo application run times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSample {
    pub values: Vec<f64>,
    pub model_kind: ModelKind,
    pub seed: u64,
}

/// Draws `samples` application run times from `model`.
pub fn sample_app(
    model: &FittedModel,
    kind: ModelKind,
    samples: usize,
    seed: u64,
) -> Result<PredictiveSample, PredictError> {
    let values = SumPlan::full(model, kind).sample(samples, seed)?;
    Ok(PredictiveSample {
        values,
        model_kind: kind,
        seed,
    })
}

impl PredictiveSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn quantile(&self, q: f64) -> Result<f64, PredictError> {
        quantile(&self.values, q)
    }

    /// Samples below zero; normals are not truncated, so these can occur.
    pub fn negative_count(&self) -> usize {
        self.values.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn summary(&self) -> Result<SampleSummary, PredictError> {
        SampleSummary::of(&self.values)
    }

    pub fn ecdf(&self) -> Result<Ecdf, PredictError> {
        Ecdf::new(&self.values)
    }

    /// One value per line.
    pub fn write_values<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_values(&self.values, out)
    }
}

pub fn write_values<W: Write>(values: &[f64], mut out: W) -> std::io::Result<()> {
    for v in values {
        writeln!(out, "{v}")?;
    }
    out.flush()
}

/// Reads a one-value-per-line file; blank lines are ignored.
pub fn read_values<R: BufRead>(input: R) -> Result<Vec<f64>, PredictError> {
    let mut values = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| PredictError::BadValue {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let v: f64 = text.parse().map_err(|_| PredictError::BadValue {
            line: i + 1,
            reason: format!("`{text}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(PredictError::BadValue {
                line: i + 1,
                reason: "value is not finite".to_string(),
            });
        }
        values.push(v);
    }
    Ok(values)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Interpolated order statistic: position `q * (n - 1)` in the sorted values.
pub fn quantile(values: &[f64], q: f64) -> Result<f64, PredictError> {
    if values.is_empty() {
        return Err(PredictError::EmptySample);
    }
    quantile_sorted(&sorted(values), q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64, PredictError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(PredictError::QuantileOutOfRange(q));
    }
    let n = sorted.len();
    if n == 0 {
        return Err(PredictError::EmptySample);
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        return Ok(sorted[n - 1]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

pub fn quantiles(values: &[f64], qs: &[f64]) -> Result<Vec<f64>, PredictError> {
    if values.is_empty() {
        return Err(PredictError::EmptySample);
    }
    let s = sorted(values);
    qs.iter().map(|&q| quantile_sorted(&s, q)).collect()
}

/// The reporting summary: mean, spread, median and the 1st/99th percentiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub p1: f64,
    pub p99: f64,
    pub negative: usize,
}

impl SampleSummary {
    pub fn of(values: &[f64]) -> Result<Self, PredictError> {
        let q = quantiles(values, &[0.5, 0.01, 0.99])?;
        let spread = NormalParams::from_sample(values).ok_or(PredictError::EmptySample)?;
        Ok(Self {
            n: values.len(),
            mean: spread.loc,
            std: spread.scale,
            median: q[0],
            p1: q[1],
            p99: q[2],
            negative: values.iter().filter(|&&v| v < 0.0).count(),
        })
    }
}

impl fmt::Display for SampleSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "median {} s, p1 {} s, p99 {} s (mean {} s, std {} s, n = {}, negative = {})",
            self.median, self.p1, self.p99, self.mean, self.std, self.n, self.negative
        )
    }
}

/// Right-continuous empirical CDF: distinct sorted values and the fraction
/// of observations at or below each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    pub values: Vec<f64>,
    pub cum_fractions: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self, PredictError> {
        if values.is_empty() {
            return Err(PredictError::EmptySample);
        }
        let s = sorted(values);
        let n = s.len() as f64;
        let mut out = Ecdf {
            values: Vec::new(),
            cum_fractions: Vec::new(),
        };
        for (i, &v) in s.iter().enumerate() {
            if s.get(i + 1) == Some(&v) {
                continue;
            }
            out.values.push(v);
            out.cum_fractions.push((i + 1) as f64 / n);
        }
        Ok(out)
    }

    /// F(x): fraction of observations <= x.
    pub fn eval(&self, x: f64) -> f64 {
        match self.values.partition_point(|&v| v <= x) {
            0 => 0.0,
            k => self.cum_fractions[k - 1],
        }
    }

    /// CSV with header `value,cum_fraction`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value", "cum_fraction"])?;
        for (v, c) in self.values.iter().zip(&self.cum_fractions) {
            w.write_record([v.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest vertical gap between the two empirical CDFs.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64, PredictError> {
    if a.is_empty() || b.is_empty() {
        return Err(PredictError::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = match a[i].total_cmp(&b[j]) {
            Ordering::Greater => b[j],
            _ => a[i],
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("quantile {0} is outside [0, 1]")]
    QuantileOutOfRange(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("line {line}: {reason}")]
    BadValue { line: usize, reason: String },
}
