use crate::trace::{ApplicationRun, JobKind, JobRecord, TraceSet};

#[track_caller]
pub(crate) fn assert_close(actual: f64, expected: f64, tol: f64) {
    assert!(
        (actual - expected).abs() <= tol,
        "got {actual}, expected {expected} ± {tol}"
    );
}

/// Jobs laid out back to back from t = 0, then `overhead` of idle wall time.
pub(crate) fn run_with_kinds(app_id: &str, kinds: &[JobKind], durations: &[f64], overhead: f64) -> ApplicationRun {
    assert_eq!(kinds.len(), durations.len());
    let mut t = 0.0;
    let jobs = kinds
        .iter()
        .zip(durations)
        .enumerate()
        .map(|(index, (&kind, &d))| {
            let job = JobRecord::new(index, kind, t, t + d);
            t += d;
            job
        })
        .collect();
    ApplicationRun {
        app_id: app_id.to_string(),
        wall_time_s: t + overhead,
        jobs,
    }
}

/// Two runs of a three-job application: one non-iterative job, then two
/// iterative ones.
pub(crate) fn worked_example() -> TraceSet {
    let kinds = [JobKind::NonIterative, JobKind::Iterative, JobKind::Iterative];
    TraceSet::new(
        vec![
            run_with_kinds("run1", &kinds, &[1.0, 2.0, 4.0], 1.0),
            run_with_kinds("run2", &kinds, &[3.0, 4.0, 6.0], 1.0),
        ],
        None,
    )
    .unwrap()
}
