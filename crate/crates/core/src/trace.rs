//! Application and job traces, plus the canonical JSON trace document.
//!
//! A trace is two levels deep: an [`ApplicationRun`] is an ordered list of
//! [`JobRecord`]s. Job times are kept as offsets from application start so
//! that the spawn overhead (wall time not covered by any job) can be audited.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Whether a job belongs to the algorithm's convergence loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Iterative,
    NonIterative,
}

/// One job of an application run. Times are seconds from application start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub index: usize,
    pub kind: JobKind,
    pub start_s: f64,
    pub end_s: f64,
}

impl JobRecord {
    pub fn new(index: usize, kind: JobKind, start_s: f64, end_s: f64) -> Self {
        Self {
            index,
            kind,
            start_s,
            end_s,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn is_iterative(&self) -> bool {
        self.kind == JobKind::Iterative
    }

    fn validate(&self) -> Result<(), String> {
        if !self.start_s.is_finite() || !self.end_s.is_finite() {
            return Err(format!("job {} has a non-finite time", self.index));
        }
        if self.start_s < 0.0 {
            return Err(format!(
                "job {} starts before the application (start_s = {})",
                self.index, self.start_s
            ));
        }
        if self.end_s < self.start_s {
            return Err(format!(
                "job {} ends before it starts (start_s = {}, end_s = {})",
                self.index, self.start_s, self.end_s
            ));
        }
        Ok(())
    }
}

/// One execution of an application.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplicationRun {
    pub app_id: String,
    pub wall_time_s: f64,
    pub jobs: Vec<JobRecord>,
}

impl ApplicationRun {
    /// Sum of all job durations, in job order.
    pub fn job_sum(&self) -> f64 {
        self.jobs.iter().map(JobRecord::duration).sum()
    }

    /// Wall time not covered by jobs: scheduler gaps and job spawning.
    /// Negative only if jobs overlap.
    pub fn overhead(&self) -> f64 {
        self.wall_time_s - self.job_sum()
    }

    pub fn has_negative_overhead(&self) -> bool {
        self.overhead() < 0.0
    }

    pub fn iterative_durations(&self) -> impl Iterator<Item = f64> + '_ {
        self.jobs.iter().filter(|j| j.is_iterative()).map(JobRecord::duration)
    }

    pub fn kinds(&self) -> Vec<JobKind> {
        self.jobs.iter().map(|j| j.kind).collect()
    }

    /// Checks the per-run invariants; the error text names the offending element.
    pub fn validate(&self) -> Result<(), String> {
        if self.jobs.is_empty() {
            return Err("run has no jobs".to_string());
        }
        if !self.wall_time_s.is_finite() {
            return Err("wall_time_s is not finite".to_string());
        }
        for (position, job) in self.jobs.iter().enumerate() {
            if job.index > position {
                return Err(format!("job index {position} missing"));
            }
            if job.index < position {
                return Err(format!("job index {} duplicated or out of order", job.index));
            }
            job.validate()?;
        }
        let last_end = self.jobs.iter().map(|j| j.end_s).fold(0.0, f64::max);
        if self.wall_time_s < last_end {
            return Err(format!(
                "wall_time_s {} is shorter than the last job end {}",
                self.wall_time_s, last_end
            ));
        }
        Ok(())
    }
}

/// Inclusive range of job indices that are iterative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct IterativeWindow {
    pub first: usize,
    pub last: usize,
}

impl IterativeWindow {
    pub fn new(first: usize, last: usize) -> Result<Self, TraceError> {
        if first > last {
            return Err(TraceError::InvertedWindow { first, last });
        }
        Ok(Self { first, last })
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.first..=self.last).contains(&index)
    }

    /// Number of iterative jobs covered.
    pub fn width(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn kind_of(&self, index: usize) -> JobKind {
        if self.contains(index) {
            JobKind::Iterative
        } else {
            JobKind::NonIterative
        }
    }
}

impl From<[usize; 2]> for IterativeWindow {
    fn from([first, last]: [usize; 2]) -> Self {
        Self { first, last }
    }
}

impl From<IterativeWindow> for [usize; 2] {
    fn from(w: IterativeWindow) -> Self {
        [w.first, w.last]
    }
}

impl fmt::Display for IterativeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.first, self.last)
    }
}

impl std::str::FromStr for IterativeWindow {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TraceError::BadWindowSyntax(s.to_string());
        let (first, last) = s.split_once(':').ok_or_else(bad)?;
        let first = first.trim().parse().map_err(|_| bad())?;
        let last = last.trim().parse().map_err(|_| bad())?;
        IterativeWindow::new(first, last)
    }
}

/// Marks jobs inside `window` iterative and all others non-iterative.
pub fn classify_jobs(run: &ApplicationRun, window: IterativeWindow) -> Result<ApplicationRun, TraceError> {
    if window.first > window.last {
        return Err(TraceError::InvertedWindow {
            first: window.first,
            last: window.last,
        });
    }
    let n = run.jobs.len();
    for index in [window.first, window.last] {
        if index >= n {
            return Err(TraceError::WindowOutOfRange {
                app_id: run.app_id.clone(),
                index,
                jobs: n,
            });
        }
    }
    let mut out = run.clone();
    for job in &mut out.jobs {
        job.kind = window.kind_of(job.index);
    }
    Ok(out)
}

/// Something suspicious about a run that does not make it invalid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum TraceWarning {
    /// Jobs cover more time than the wall clock, so they must overlap.
    NegativeOverhead { app_id: String, overhead_s: f64 },
    /// The run's job count differs from the most common job count.
    JobCountMismatch { app_id: String, jobs: usize, modal: usize },
}

impl fmt::Display for TraceWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceWarning::NegativeOverhead { app_id, overhead_s } => {
                write!(f, "{app_id}: negative overhead {overhead_s} s (overlapping jobs)")
            }
            TraceWarning::JobCountMismatch { app_id, jobs, modal } => {
                write!(f, "{app_id}: {jobs} jobs, most runs have {modal}")
            }
        }
    }
}

impl TraceWarning {
    pub fn app_id(&self) -> &str {
        match self {
            TraceWarning::NegativeOverhead { app_id, .. } | TraceWarning::JobCountMismatch { app_id, .. } => app_id,
        }
    }
}

/// A set of runs of the same application.
///
/// Warnings are derived from the runs whenever a set is built or parsed and
/// are not part of the serialized document.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TraceSet {
    runs: Vec<ApplicationRun>,
    iterative_window: Option<IterativeWindow>,
    #[serde(skip)]
    warnings: Vec<TraceWarning>,
}

impl TraceSet {
    pub fn new(runs: Vec<ApplicationRun>, iterative_window: Option<IterativeWindow>) -> Result<Self, TraceError> {
        for (i, run) in runs.iter().enumerate() {
            run.validate().map_err(|reason| TraceError::Invalid {
                path: format!("runs[{i}]"),
                reason,
            })?;
            if let Some(window) = iterative_window {
                if let Some(job) = run.jobs.iter().find(|j| j.kind != window.kind_of(j.index)) {
                    return Err(TraceError::Invalid {
                        path: format!("runs[{i}].jobs[{}].kind", job.index),
                        reason: format!("kind disagrees with iterative window {window}"),
                    });
                }
            }
        }
        let warnings = derive_warnings(&runs);
        Ok(Self {
            runs,
            iterative_window,
            warnings,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn runs(&self) -> &[ApplicationRun] {
        &self.runs
    }

    pub fn into_runs(self) -> Vec<ApplicationRun> {
        self.runs
    }

    pub fn iterative_window(&self) -> Option<IterativeWindow> {
        self.iterative_window
    }

    pub fn warnings(&self) -> &[TraceWarning] {
        &self.warnings
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_flagged(&self, app_id: &str) -> bool {
        self.warnings.iter().any(|w| w.app_id() == app_id)
    }

    /// Most common job count; ties go to the smaller count.
    pub fn modal_job_count(&self) -> Option<usize> {
        modal_job_count(&self.runs)
    }

    pub fn find_run(&self, app_id: &str) -> Option<&ApplicationRun> {
        self.runs.iter().find(|r| r.app_id == app_id)
    }
}

fn modal_job_count(runs: &[ApplicationRun]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for run in runs {
        *counts.entry(run.jobs.len()).or_default() += 1;
    }
    // BTreeMap iterates ascending, and max_by_key keeps the last maximum,
    // so reverse to let the smallest count win ties.
    counts.into_iter().rev().max_by_key(|&(_, n)| n).map(|(jobs, _)| jobs)
}

fn derive_warnings(runs: &[ApplicationRun]) -> Vec<TraceWarning> {
    let mut warnings = Vec::new();
    let modal = modal_job_count(runs);
    for run in runs {
        if run.has_negative_overhead() {
            warnings.push(TraceWarning::NegativeOverhead {
                app_id: run.app_id.clone(),
                overhead_s: run.overhead(),
            });
        }
        if let Some(modal) = modal {
            if run.jobs.len() != modal {
                warnings.push(TraceWarning::JobCountMismatch {
                    app_id: run.app_id.clone(),
                    jobs: run.jobs.len(),
                    modal,
                });
            }
        }
    }
    warnings
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDocument {
    runs: Vec<ApplicationRun>,
    iterative_window: Option<IterativeWindow>,
}

impl<'de> Deserialize<'de> for TraceSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = TraceDocument::deserialize(deserializer)?;
        TraceSet::new(doc.runs, doc.iterative_window).map_err(serde::de::Error::custom)
    }
}

/// Encodes a trace set as the canonical JSON document.
pub fn serialize_traces(traces: &TraceSet) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(traces).expect("trace sets always serialize");
    out.push(b'\n');
    out
}

/// Decodes a canonical trace document, checking every invariant.
pub fn parse_traces(bytes: &[u8]) -> Result<TraceSet, TraceError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: TraceDocument = serde_path_to_error::deserialize(de).map_err(|e| TraceError::Malformed {
        path: e.path().to_string(),
        reason: e.inner().to_string(),
    })?;
    if let Some(window) = doc.iterative_window {
        IterativeWindow::new(window.first, window.last)?;
    }
    TraceSet::new(doc.runs, doc.iterative_window)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("malformed trace document at `{path}`: {reason}")]
    Malformed { path: String, reason: String },
    #[error("invalid trace at `{path}`: {reason}")]
    Invalid { path: String, reason: String },
    #[error("iterative window {first}:{last} is inverted")]
    InvertedWindow { first: usize, last: usize },
    #[error("iterative window index {index} is out of range for run `{app_id}` with {jobs} jobs")]
    WindowOutOfRange { app_id: String, index: usize, jobs: usize },
    #[error("cannot parse iterative window `{0}`, expected FIRST:LAST")]
    BadWindowSyntax(String),
}
