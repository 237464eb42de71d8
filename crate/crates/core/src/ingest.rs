//! Spark master event logs (one JSON object per line) into [`ApplicationRun`]s.
//!
//! Only application start/end and job start/end events are read; stage and
//! task events are skipped. Timestamps are epoch milliseconds in the log and
//! seconds everywhere after this module.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::trace::{classify_jobs, ApplicationRun, IterativeWindow, JobKind, JobRecord, TraceError, TraceSet};

const APP_START: &str = "SparkListenerApplicationStart";
const APP_END: &str = "SparkListenerApplicationEnd";
const JOB_START: &str = "SparkListenerJobStart";
const JOB_END: &str = "SparkListenerJobEnd";

/// One decoded log line.
#[derive(Clone, Debug, PartialEq)]
pub struct RawEvent {
    pub event_name: String,
    pub payload: Map<String, Value>,
}

impl RawEvent {
    pub fn parse(line: &str) -> Result<Self, String> {
        let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let Value::Object(mut payload) = value else {
            return Err("event is not a JSON object".to_string());
        };
        let event_name = match payload.remove("Event") {
            Some(Value::String(name)) if !name.is_empty() => name,
            Some(_) => return Err("\"Event\" is not a non-empty string".to_string()),
            None => return Err("missing \"Event\" field".to_string()),
        };
        Ok(Self { event_name, payload })
    }

    fn int(&self, field: &str) -> Result<i64, String> {
        self.payload
            .get(field)
            .and_then(Value::as_i64)
            .ok_or_else(|| format!("{} without integer \"{field}\"", self.event_name))
    }

    fn string(&self, field: &str) -> Option<&str> {
        self.payload.get(field).and_then(Value::as_str)
    }
}

/// What the run's wall time is measured between.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallClock {
    /// ApplicationStart to ApplicationEnd.
    #[default]
    Application,
    /// First job submission to last job completion; job offsets are rebased
    /// onto the first submission.
    Jobs,
}

impl FromStr for WallClock {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "application" => Ok(WallClock::Application),
            "jobs" => Ok(WallClock::Jobs),
            other => Err(format!("unknown wall clock `{other}`")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    #[serde(default)]
    pub wall_clock: WallClock,
    /// Used when the log has no "App ID".
    #[serde(default)]
    pub app_id: Option<String>,
}

#[derive(Default)]
struct JobTimes {
    submitted: Option<i64>,
    completed: Option<i64>,
}

/// Parses the event log of a single application.
///
/// All jobs come back non-iterative; see [`classify_jobs`].
pub fn parse_event_log<R: BufRead>(reader: R, options: &IngestOptions) -> Result<ApplicationRun, IngestError> {
    let mut app_start: Option<i64> = None;
    let mut app_end: Option<i64> = None;
    let mut app_id: Option<String> = None;
    let mut jobs: BTreeMap<u64, JobTimes> = BTreeMap::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IngestError::Line {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let at_line = |reason: String| IngestError::Line { line: line_no, reason };
        let event = RawEvent::parse(&line).map_err(at_line)?;
        match event.event_name.as_str() {
            APP_START => {
                if app_start.is_some() {
                    return Err(IngestError::Structure(format!("second {APP_START} at line {line_no}")));
                }
                app_start = Some(event.int("Timestamp").map_err(at_line)?);
                app_id = event.string("App ID").map(str::to_string);
            }
            APP_END => {
                if app_end.is_some() {
                    return Err(IngestError::Structure(format!("second {APP_END} at line {line_no}")));
                }
                app_end = Some(event.int("Timestamp").map_err(at_line)?);
            }
            JOB_START => {
                let id = job_id(&event).map_err(at_line)?;
                let submitted = event.int("Submission Time").map_err(at_line)?;
                let times = jobs.entry(id).or_default();
                if times.submitted.replace(submitted).is_some() {
                    return Err(at_line(format!("duplicate {JOB_START} for job {id}")));
                }
            }
            JOB_END => {
                let id = job_id(&event).map_err(at_line)?;
                let completed = event.int("Completion Time").map_err(at_line)?;
                if !event.payload.contains_key("Job Result") {
                    return Err(at_line(format!("{JOB_END} for job {id} has no \"Job Result\"")));
                }
                let times = jobs.entry(id).or_default();
                if times.completed.replace(completed).is_some() {
                    return Err(at_line(format!("duplicate {JOB_END} for job {id}")));
                }
            }
            _ => {}
        }
    }

    let app_start = app_start.ok_or_else(|| IngestError::Structure(format!("no {APP_START} event")))?;
    let app_end = app_end.ok_or_else(|| IngestError::Structure(format!("no {APP_END} event")))?;

    let incomplete: Vec<u64> = jobs
        .iter()
        .filter(|(_, t)| t.submitted.is_none() || t.completed.is_none())
        .map(|(&id, _)| id)
        .collect();
    if !incomplete.is_empty() {
        return Err(IngestError::IncompleteJobs(incomplete));
    }
    if jobs.is_empty() {
        return Err(IngestError::Structure("application has no jobs".to_string()));
    }

    let spans: Vec<(i64, i64)> = jobs
        .values()
        .map(|t| (t.submitted.unwrap_or_default(), t.completed.unwrap_or_default()))
        .collect();
    let (origin, wall_ms) = match options.wall_clock {
        WallClock::Application => (app_start, app_end - app_start),
        WallClock::Jobs => {
            let first = spans.iter().map(|s| s.0).min().unwrap_or(app_start);
            let last = spans.iter().map(|s| s.1).max().unwrap_or(app_end);
            (first, last - first)
        }
    };
    let seconds = |ms: i64| ms as f64 / 1000.0;
    let run = ApplicationRun {
        app_id: app_id
            .or_else(|| options.app_id.clone())
            .unwrap_or_else(|| "app".to_string()),
        wall_time_s: seconds(wall_ms),
        jobs: spans
            .iter()
            .enumerate()
            .map(|(index, &(s, e))| {
                JobRecord::new(index, JobKind::NonIterative, seconds(s - origin), seconds(e - origin))
            })
            .collect(),
    };
    run.validate().map_err(IngestError::Structure)?;
    Ok(run)
}

fn job_id(event: &RawEvent) -> Result<u64, String> {
    event
        .payload
        .get("Job ID")
        .and_then(Value::as_u64)
        .ok_or_else(|| format!("{} without integer \"Job ID\"", event.event_name))
}

/// An in-memory event log with a display name (usually its path).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogSource {
    pub name: String,
    pub content: String,
}

/// Parses and classifies every source. Sources are processed in name order.
pub fn ingest_sources(
    sources: &[LogSource],
    window: IterativeWindow,
    options: &IngestOptions,
) -> Result<TraceSet, IngestError> {
    if sources.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut ordered: Vec<&LogSource> = sources.iter().collect();
    ordered.sort_by(|a, b| a.name.cmp(&b.name));
    let results: Vec<Result<ApplicationRun, IngestError>> = ordered
        .par_iter()
        .map(|source| {
            let opts = IngestOptions {
                app_id: options.app_id.clone().or_else(|| Some(stem(&source.name))),
                ..options.clone()
            };
            let run = parse_event_log(source.content.as_bytes(), &opts)?;
            Ok(classify_jobs(&run, window)?)
        })
        .collect();
    collect_runs(ordered.iter().map(|s| s.name.clone()).zip(results), window)
}

/// Reads, parses and classifies one event log per path.
pub fn ingest_directory<P: AsRef<Path>>(
    paths: &[P],
    window: IterativeWindow,
    options: &IngestOptions,
) -> Result<TraceSet, IngestError> {
    if paths.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut ordered: Vec<PathBuf> = paths.iter().map(|p| p.as_ref().to_path_buf()).collect();
    ordered.sort();
    let results: Vec<Result<ApplicationRun, IngestError>> = ordered
        .par_iter()
        .map(|path| {
            let file = std::fs::File::open(path).map_err(|e| IngestError::Io(e.to_string()))?;
            let opts = IngestOptions {
                app_id: options.app_id.clone().or_else(|| Some(stem(&path.to_string_lossy()))),
                ..options.clone()
            };
            let run = parse_event_log(std::io::BufReader::new(file), &opts)?;
            Ok(classify_jobs(&run, window)?)
        })
        .collect();
    collect_runs(ordered.iter().map(|p| p.display().to_string()).zip(results), window)
}

fn collect_runs(
    results: impl Iterator<Item = (String, Result<ApplicationRun, IngestError>)>,
    window: IterativeWindow,
) -> Result<TraceSet, IngestError> {
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (name, result) in results {
        match result {
            Ok(run) => runs.push(run),
            Err(err) => failures.push(SourceFailure {
                name,
                error: err.to_string(),
            }),
        }
    }
    if !failures.is_empty() {
        return Err(IngestError::Sources(failures));
    }
    if runs.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let set = TraceSet::new(runs, Some(window))?;
    for warning in set.warnings() {
        tracing::warn!("{warning}");
    }
    Ok(set)
}

fn stem(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceFailure {
    pub name: String,
    pub error: String,
}

impl fmt::Display for SourceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.error)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("malformed application log: {0}")]
    Structure(String),
    #[error("jobs started but never finished: {}", join_ids(.0))]
    IncompleteJobs(Vec<u64>),
    #[error("{0}")]
    Io(String),
    #[error("{} event log(s) failed: {}", .0.len(), .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Sources(Vec<SourceFailure>),
    #[error("no event logs to ingest")]
    EmptyInput,
    #[error(transparent)]
    Trace(#[from] TraceError),
}

fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
}
